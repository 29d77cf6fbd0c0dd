#include <CLI11.hpp>

#include <Eigen/Dense>
#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include "cemflow/error.hpp"
#include "cemflow/metrics.hpp"
#include "cemflow/problem.hpp"
#include "support.hpp"

using namespace cemflow;
using namespace cemflow::testing;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;
};

class Detail {
 public:
  Detail& operator<<(const std::string& s) {
    os_ << s;
    return *this;
  }
  Detail& num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", v);
    os_ << buf;
    return *this;
  }
  Detail& ratio(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    os_ << buf;
    return *this;
  }
  std::string str() const { return os_.str(); }

 private:
  std::ostringstream os_;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool within(double v, double lo, double hi) { return v >= lo && v <= hi; }

double rel(const NormEvaluator& norms, NormKind kind, const Vec& u, const Vec& ref) {
  return relative_error(norms, kind, u, ref).value;
}

double trajectory_rel(const NormEvaluator& norms, const std::vector<Vec>& u, const std::vector<Vec>& ref,
                      double tau) {
  std::vector<Vec> diff(u.size());
  for (std::size_t n = 0; n < u.size(); ++n) diff[n] = u[n] - ref[n];
  return norms.trajectory_norm(diff, tau) / norms.trajectory_norm(ref, tau);
}

std::vector<Vec> every(const std::vector<Vec>& v, int stride) {
  std::vector<Vec> out;
  for (std::size_t n = 0; n < v.size(); n += std::size_t(stride)) out.push_back(v[n]);
  return out;
}

// ---------------------------------------------------------------- steady

Verdict steady_convergence() {
  const auto t0 = std::chrono::steady_clock::now();
  ProblemSpec spec;
  spec.f = "gauss_pair";
  Vec u_ref;
  std::vector<double> eL, eA;
  Detail d;
  for (auto [N, m] : {std::pair{10, 3}, std::pair{20, 4}, std::pair{40, 5}}) {
    const auto inst = Instance::create(spec, N, N);
    const auto loads = inst->steady_loads();
    if (u_ref.size() == 0) u_ref = reference_steady(inst->forms(), loads);
    const auto off = build_offline(inst->inputs(), m, loads.g_tilde, false);
    const Vec zero = Vec::Zero(u_ref.size());
    const auto sol = steady_solve(inst->forms(), off.basis, off.dirichlet.total, zero, loads);
    const NormEvaluator norms(inst->forms());
    eL.push_back(rel(norms, NormKind::L2, sol.u, u_ref));
    eA.push_back(rel(norms, NormKind::Acal, sol.u, u_ref));
    d << "H=1/" << std::to_string(N) << " L2 ";
    d.num(eL.back()) << " Acal ";
    d.num(eA.back()) << "; ";
  }
  Verdict v;
  d << "ratios L2";
  for (std::size_t k = 1; k < eL.size(); ++k) {
    const double r = eL[k] / eL[k - 1];
    v.pass = v.pass && within(r, 0.10, 0.45);
    d << " ";
    d.ratio(r);
  }
  d << " Acal";
  for (std::size_t k = 1; k < eA.size(); ++k) {
    const double r = eA[k] / eA[k - 1];
    v.pass = v.pass && within(r, 0.20, 0.65);
    d << " ";
    d.ratio(r);
  }
  const double wall = seconds_since(t0);
  v.pass = v.pass && wall <= 900.0;
  d << "; wall ";
  d.ratio(wall) << " s";
  v.detail = d.str();
  return v;
}

// ---------------------------------------------------------------- decay

Verdict corrector_decay() {
  ProblemSpec spec;
  spec.contrast = 1e3;
  spec.velocity = VelocityMode::inflow;
  spec.c_flow = 2.0;
  spec.segments = robin_layout();
  const auto inst = Instance::create(spec, 10, 10);
  const PiProjector& pi = inst->pi();
  const NormEvaluator norms(inst->forms(), &pi);
  const Vec g = inst->steady_loads().g_tilde;
  const Vec Dg = dirichlet_corrector(inst->inputs(), kGlobalLayers, g).total;
  const Vec Ng = neumann_corrector(inst->inputs(), kGlobalLayers).total;
  Verdict v;
  Detail d;
  std::map<std::string, double> prev;
  auto check = [&](const std::string& name, double e) {
    auto it = prev.find(name);
    if (it != prev.end() && it->second > 1e-10) v.pass = v.pass && e <= 0.5 * it->second;
    prev[name] = e;
  };
  for (int m = 2; m <= 6; ++m) {
    const auto off = build_offline(inst->inputs(), m, g, true);
    const Vec& D = off.dirichlet.total;
    const Vec& N = off.neumann.total;
    const double dB = rel(norms, NormKind::B, D, Dg), dL = rel(norms, NormKind::L2, D, Dg);
    const double nB = rel(norms, NormKind::B, N, Ng), nL = rel(norms, NormKind::L2, N, Ng);
    check("DB", dB);
    check("DL", dL);
    check("NB", nB);
    check("NL", nL);
    d << "m=" << std::to_string(m) << " N ";
    d.num(nB) << "/";
    d.num(nL) << " D ";
    d.num(dB) << "/";
    d.num(dL) << "; ";
  }
  d << "(B/L2, H=1/10, 200x200)";
  v.detail = d.str();
  return v;
}

// ---------------------------------------------------------------- saturation

Verdict saturation() {
  const auto t0 = std::chrono::steady_clock::now();
  auto spec = small_spec(16);
  spec.velocity = VelocityMode::inflow;
  spec.c_flow = 2.0;
  spec.segments = robin_layout();
  const auto inst = Instance::create(spec, 4, 4);
  const GlobalOracle oracle(*inst, inst->forms().acal);
  const auto loads = inst->steady_loads();
  const auto off = build_offline(inst->inputs(), 4, loads.g_tilde, true);
  double worst_basis = 0.0;
  for (Index k = 0; k < off.basis.cols(); ++k)
    worst_basis = std::max(worst_basis, rel_b(*inst, oracle.Q, off.basis.column(k), oracle.solve(oracle.Q.col(k))));
  const double eD = rel_b(*inst, oracle.Q, off.dirichlet.total, oracle.solve(inst->forms().acal * loads.g_tilde));
  const Vec q = boundary_load(inst->grids().fine, inst->boundary());
  const double eN = rel_b(*inst, oracle.Q, off.neumann.total, oracle.solve(q));

  auto full = spec;
  full.lm = 25;
  const auto finst = Instance::create(full, 4, 4);
  const auto floads = finst->steady_loads();
  const auto foff = build_offline(finst->inputs(), 4, floads.g_tilde, true);
  const auto sol = steady_solve(finst->forms(), foff.basis, foff.dirichlet.total, foff.neumann.total, floads);
  const Vec u_ref = reference_steady(finst->forms(), floads);
  const double eU = rel(NormEvaluator(finst->forms()), NormKind::L2, sol.u, u_ref);
  const double wall = seconds_since(t0);

  Verdict v;
  v.pass = worst_basis <= 1e-9 && eD <= 1e-9 && eN <= 1e-9 && eU <= 1e-8 && wall <= 30.0;
  Detail d;
  d << "basis ";
  d.num(worst_basis) << " D ";
  d.num(eD) << " N ";
  d.num(eN) << " u(lm=25) ";
  d.num(eU) << "; wall ";
  d.ratio(wall) << " s";
  v.detail = d.str();
  return v;
}

// ---------------------------------------------------------------- zero data

Verdict zero_data() {
  auto spec = small_spec(40);
  spec.velocity = VelocityMode::inflow;
  spec.c_flow = 1.0;
  spec.segments = robin_layout(0.0, 0.0, 0.0, 0.0);
  spec.g = spec.f = spec.u_init = "zero";
  spec.reaction = "allen_cahn";
  const auto inst = Instance::create(spec, 8, 8);
  const auto loads = inst->steady_loads();
  const auto off = build_offline(inst->inputs(), 2, loads.g_tilde, true);
  const auto sol = steady_solve(inst->forms(), off.basis, off.dirichlet.total, off.neumann.total, loads);
  double worst = std::max({sol.u.cwiseAbs().maxCoeff(), sol.D.cwiseAbs().maxCoeff(), sol.N.cwiseAbs().maxCoeff(),
                           sol.coeff.cwiseAbs().maxCoeff()});
  const double steady = worst;
  double trans = 0.0, strang = 0.0;
  for (Scheme scheme : {Scheme::cd, Scheme::diffusion}) {
    const TransientContext ctx(inst->inputs(), off.basis, 2, spec.transient_data(), make_scheme(0.1, 1.0, scheme));
    for (int n = 0; n <= ctx.config().steps; ++n)
      trans = std::max({trans, ctx.D(n).cwiseAbs().maxCoeff(), ctx.N(n).cwiseAbs().maxCoeff()});
    trans = std::max(trans, transient_solve(ctx).max_abs);
    if (scheme == Scheme::cd) strang = strang_solve(ctx).max_abs;
  }
  worst = std::max({worst, trans, strang});
  Verdict v;
  v.pass = worst <= 1e-12;
  Detail d;
  d << "max |.| steady ";
  d.num(steady) << " transient ";
  d.num(trans) << " strang ";
  d.num(strang);
  v.detail = d.str();
  return v;
}

// ---------------------------------------------------------------- spectral

Verdict spectral_suite() {
  auto spec = small_spec(100);
  spec.velocity = VelocityMode::inflow;
  spec.c_flow = 4.0;
  const auto inst = Instance::create(spec, 10, 10);
  const auto& forms = inst->forms();
  const auto& aux = inst->aux();
  const auto& pi = inst->pi();
  double residual = 0.0, gram = 0.0, idem = 0.0, bound = 0.0;
  std::mt19937_64 rng(2024);
  for (Index e = 0; e < aux.num_elements(); ++e) {
    const auto& el = aux.element(e);
    const Mat A = element_matrix(forms, e, FormKind::acal);
    const Mat S = element_matrix(forms, e, FormKind::weighted_mass);
    const double nA = A.norm(), nS = S.norm();
    for (Index j = 0; j < el.lambda_re.size(); ++j) {
      const std::complex<double> lam(el.lambda_re[j], el.lambda_im[j]);
      const Eigen::VectorXcd phi = el.raw.col(j);
      const Eigen::VectorXcd r = A.cast<std::complex<double>>() * phi - lam * (S.cast<std::complex<double>>() * phi);
      residual = std::max(residual, r.norm() / ((nA + std::abs(lam) * nS) * phi.norm()));
    }
    const Mat G = el.basis.transpose() * S * el.basis;
    gram = std::max(gram, (G - Mat::Identity(G.rows(), G.cols())).cwiseAbs().maxCoeff());
    const double lam = el.lambda_re[aux.lm()];
    for (int k = 0; k < 20; ++k) {
      const Vec v = random_vec(A.rows(), rng);
      const Vec r = v - el.basis * (el.q.transpose() * v);
      bound = std::max(bound, r.dot(S * r) / (v.dot(A * v) / lam));
    }
  }
  for (int k = 0; k < 20; ++k) {
    const Vec v = random_vec(inst->grids().fine.num_nodes(), rng);
    const BrokenField p1 = pi.apply(v);
    BrokenField diff = pi.apply(p1);
    for (std::size_t e = 0; e < diff.parts.size(); ++e) diff.parts[e] -= p1.parts[e];
    idem = std::max(idem, std::sqrt(pi.s_norm_squared(diff) / pi.s_norm_squared(p1)));
  }
  Verdict v;
  v.pass = residual <= 1e-8 && gram <= 1e-10 && idem <= 1e-10 && bound <= 1.0 + 1e-6;
  Detail d;
  d << "residual ";
  d.num(residual) << " gram ";
  d.num(gram) << " idempotence ";
  d.num(idem) << " max |v-pi v|_s^2 lambda/a(v,v) ";
  d.ratio(bound) << " (" << std::to_string(aux.num_elements()) << " elements, complex pairs "
                 << std::to_string(aux.complex_count()) << ")";
  v.detail = d.str();
  return v;
}

// ---------------------------------------------------------------- transient

struct TransientRun {
  double L2 = 0.0;
  double energy = 0.0;
  double Lambda = 0.0;
};

TransientRun run_transient(const Instance& inst, const MultiscaleSpace& basis, int layers, const SchemeConfig& sc,
                           const std::vector<Vec>& ref, bool strang) {
  const TransientContext ctx(inst.inputs(), basis, layers, inst.spec().transient_data(), sc);
  const auto res = strang ? strang_solve(ctx) : transient_solve(ctx);
  const NormEvaluator norms(inst.forms(), &inst.pi());
  return {rel(norms, NormKind::L2, res.u.back(), ref.back()), trajectory_rel(norms, res.u, ref, sc.tau),
          lambda_stats(inst.aux()).Lambda};
}

constexpr int kRefSteps = 1000;

Verdict cd_vs_d() {
  const auto t0 = std::chrono::steady_clock::now();
  ProblemSpec spec;
  spec.velocity = VelocityMode::inflow;
  spec.c_flow = 4.0;
  spec.u_init = spec.g;
  const std::vector<Vec> ref = [&] {
    const auto r = Instance::create(spec, 1, 1, false);
    return reference_transient(r->forms(), spec.transient_data(), 1.0 / kRefSteps, kRefSteps, 100);
  }();
  Verdict v;
  Detail d;
  for (auto [N, m] : {std::pair{10, 3}, std::pair{20, 4}, std::pair{40, 5}}) {
    const auto inst = Instance::create(spec, N, N);
    const auto basis = build_ms_basis(inst->inputs(), m);
    const auto cd = run_transient(*inst, basis, m, make_scheme(0.1, 1.0, Scheme::cd), ref, false);
    const auto df = run_transient(*inst, basis, m, make_scheme(0.1, 1.0, Scheme::diffusion), ref, false);
    v.pass = v.pass && cd.L2 < df.L2;
    d << "H=1/" << std::to_string(N) << " CD ";
    d.num(cd.L2) << " D ";
    d.num(df.L2) << "; ";
  }
  const double wall = seconds_since(t0);
  v.pass = v.pass && wall <= 1800.0;
  d << "wall ";
  d.ratio(wall) << " s";
  v.detail = d.str();
  return v;
}

Verdict transient_convergence() {
  ProblemSpec spec;
  spec.g = "decay_exp";
  spec.u_init = "x1sq_plus_exp";
  const std::vector<Vec> ref = [&] {
    const auto r = Instance::create(spec, 1, 1, false);
    return reference_transient(r->forms(), spec.transient_data(), 1.0 / kRefSteps, kRefSteps, 100);
  }();
  Verdict v;
  Detail d;
  TransientRun prev{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(), 0.0};
  for (auto [N, m] : {std::pair{10, 7}, std::pair{20, 8}, std::pair{40, 9}}) {
    const auto inst = Instance::create(spec, N, N);
    const auto basis = build_ms_basis(inst->inputs(), m);
    const auto r = run_transient(*inst, basis, m, make_scheme(0.1, 1.0, Scheme::cd), ref, false);
    v.pass = v.pass && r.L2 < prev.L2 && r.energy < prev.energy;
    prev = r;
    d << "H=1/" << std::to_string(N) << " m=" << std::to_string(m) << " L2 ";
    d.num(r.L2) << " energy ";
    d.num(r.energy) << "; ";
  }
  v.detail = d.str();
  return v;
}

Verdict strang_splitting() {
  ProblemSpec spec;
  spec.velocity = VelocityMode::inflow;
  spec.c_flow = 0.25;
  spec.u_init = spec.g;
  spec.reaction = "allen_cahn";
  const std::vector<Vec> ref40 = [&] {
    const auto r = Instance::create(spec, 1, 1, false);
    return reference_transient(r->forms(), spec.transient_data(), 1.0 / kRefSteps, kRefSteps, kRefSteps / 40);
  }();
  Verdict v;
  Detail d;
  TransientRun prev{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(), 0.0};
  double mid = 0.0, halved = 0.0;
  for (auto [N, m] : {std::pair{10, 7}, std::pair{20, 8}, std::pair{40, 9}}) {
    const auto inst = Instance::create(spec, N, N);
    const auto basis = build_ms_basis(inst->inputs(), m);
    const double tau = 1.0 / N;
    const auto r = run_transient(*inst, basis, m, make_scheme(tau, 1.0, Scheme::cd), every(ref40, 40 / N), true);
    v.pass = v.pass && r.L2 < prev.L2 && r.energy < prev.energy;
    prev = r;
    d << "tau=H=1/" << std::to_string(N) << " L2 ";
    d.num(r.L2) << " energy ";
    d.num(r.energy) << "; ";
    if (N == 20) {
      mid = r.L2;
      halved = run_transient(*inst, basis, m, make_scheme(tau / 2, 1.0, Scheme::cd), ref40, true).L2;
    }
  }
  const double factor = halved / mid;
  v.pass = v.pass && within(factor, 0.3, 0.7);
  d << "(1/20,8) tau 1/20 -> 1/40 L2 ";
  d.num(halved) << " factor ";
  d.ratio(factor);
  v.detail = d.str();
  return v;
}

// ---------------------------------------------------------------- forms

ElementMatrix symbolic_stiffness(double hx, double hy) {
  ElementMatrix X, Y;
  X << 2, -2, -1, 1, -2, 2, 1, -1, -1, 1, 2, -2, 1, -1, -2, 2;
  Y << 2, 1, -1, -2, 1, 2, -2, -1, -1, -2, 2, 1, -2, -1, 1, 2;
  return hy / (6 * hx) * X + hx / (6 * hy) * Y;
}

ElementMatrix symbolic_mass(double hx, double hy) {
  ElementMatrix M;
  M << 4, 2, 1, 2, 2, 4, 2, 1, 1, 2, 4, 2, 2, 1, 2, 4;
  return hx * hy / 36 * M;
}

Verdict form_properties() {
  double min_quasi = std::numeric_limits<double>::infinity();
  std::mt19937_64 rng(88);
  for (double c : {0.25, 1.0, 2.0, 4.0}) {
    auto spec = small_spec(50);
    spec.velocity = VelocityMode::inflow;
    spec.c_flow = c;
    spec.segments = robin_layout();
    const auto inst = Instance::create(spec, 5, 5, false);
    for (int k = 0; k < 100; ++k) {
      const Vec v = random_vec(inst->grids().fine.num_nodes(), rng);
      min_quasi = std::min(min_quasi, v.dot(inst->forms().quasi * v) / v.squaredNorm());
    }
  }
  double div = 0.0;
  std::uniform_real_distribution<double> u(0.02, 0.98);
  const double h = 1e-5;
  for (auto mode : {VelocityMode::vortex, VelocityMode::inflow, VelocityMode::outflow})
    for (double c : {0.25, 4.0}) {
      const VelocityField vf(mode, c);
      for (int k = 0; k < 200; ++k) {
        const double x = u(rng), y = u(rng);
        const double d = (vf(x + h, y).x() - vf(x - h, y).x()) / (2 * h) + (vf(x, y + h).y() - vf(x, y - h).y()) / (2 * h);
        div = std::max(div, std::abs(d));
      }
    }
  const double div_tol = 1e-6 * 18.0 * std::numbers::pi;
  double stiff = 0.0, mass = 0.0;
  for (auto [hx, hy] : {std::pair{1.0 / 200, 1.0 / 200}, std::pair{0.1, 0.1}, std::pair{0.5, 0.25}}) {
    stiff = std::max(stiff, (q1_stiffness(hx, hy) - symbolic_stiffness(hx, hy)).cwiseAbs().maxCoeff());
    mass = std::max(mass, (q1_mass(hx, hy) - symbolic_mass(hx, hy)).cwiseAbs().maxCoeff() / (hx * hy));
  }
  const auto inst = Instance::create(uniform_spec(20, {0.0, 0.0}), 4, 4, false);
  for (Index cell : {Index(0), Index(57), Index(399)}) {
    stiff = std::max(stiff, (inst->forms().cell_matrix(cell, FormKind::diffusion) - symbolic_stiffness(0.05, 0.05))
                                .cwiseAbs()
                                .maxCoeff());
    mass = std::max(mass, (inst->forms().cell_matrix(cell, FormKind::mass) - symbolic_mass(0.05, 0.05))
                              .cwiseAbs()
                              .maxCoeff() /
                              (0.05 * 0.05));
  }
  Verdict v;
  v.pass = min_quasi >= -1e-12 && div <= div_tol && stiff <= 1e-14 && mass <= 1e-14;
  Detail d;
  d << "min quasi/|v|^2 ";
  d.num(min_quasi) << " max |div| ";
  d.num(div) << " stiffness ";
  d.num(stiff) << " mass/h^2 ";
  d.num(mass);
  v.detail = d.str();
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Runs the acceptance criteria and prints one PASS/FAIL line each."};
  std::vector<std::string> only;
  bool report = false;
  std::string log_path;
  app.add_option("--only", only, "criteria to run (default: all)");
  app.add_option("--log", log_path, "also write the verdict lines to this file");
  app.add_flag("--report", report, "exit 0 when every criterion produced a verdict");
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"steady_convergence", steady_convergence}, {"corrector_decay", corrector_decay},
      {"saturation", saturation},                 {"zero_data", zero_data},
      {"spectral_suite", spectral_suite},         {"cd_vs_d", cd_vs_d},
      {"transient_convergence", transient_convergence}, {"strang_splitting", strang_splitting},
      {"form_properties", form_properties}};

  std::FILE* log = log_path.empty() ? nullptr : std::fopen(log_path.c_str(), "w");
  auto emit = [&](const std::string& line) {
    std::fputs(line.c_str(), stdout);
    std::fflush(stdout);
    if (log) {
      std::fputs(line.c_str(), log);
      std::fflush(log);
    }
  };
  char buf[4096];
  int passed = 0, failed = 0, errors = 0;
  for (const auto& [name, run] : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), name) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      const Verdict v = run();
      (v.pass ? passed : failed) += 1;
      std::snprintf(buf, sizeof buf, "%s %s: %s [%.1f s]\n", v.pass ? "PASS" : "FAIL", name.c_str(), v.detail.c_str(),
                    seconds_since(t0));
    } catch (const std::exception& e) {
      ++errors;
      std::snprintf(buf, sizeof buf, "FAIL %s: error: %s\n", name.c_str(), e.what());
    }
    emit(buf);
  }
  std::snprintf(buf, sizeof buf, "acceptance: %d passed, %d failed, %d errors\n", passed, failed + errors, errors);
  emit(buf);
  if (log) std::fclose(log);
  if (report) return errors == 0 ? 0 : 1;
  return failed + errors == 0 ? 0 : 1;
}
