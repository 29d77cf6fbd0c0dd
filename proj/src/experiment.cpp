#include "cemflow/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "cemflow/error.hpp"
#include "cemflow/problem.hpp"

namespace cemflow {

namespace fs = std::filesystem;

Command command_from_string(std::string_view name) {
  for (Command c : {Command::steady, Command::transient, Command::nonlinear, Command::spectrum, Command::sweep,
                    Command::reference})
    if (to_string(c) == name) return c;
  throw InvalidArgument("unknown command '" + std::string(name) + "'");
}

std::string_view to_string(Command command) {
  switch (command) {
    case Command::steady: return "steady";
    case Command::transient: return "transient";
    case Command::nonlinear: return "nonlinear";
    case Command::spectrum: return "spectrum";
    case Command::sweep: return "sweep";
    case Command::reference: return "reference";
  }
  return "?";
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class Clock {
 public:
  Clock() : start_(std::chrono::steady_clock::now()) {}
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - start_).count();
    start_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

/// Relative error, NaN when the norm is indefinite for this vector.
double safe_error(const NormEvaluator& norms, NormKind kind, const Vec& u, const Vec& ref) {
  try {
    return relative_error(norms, kind, u, ref).value;
  } catch (const NumericalError&) {
    return kNaN;
  }
}

double safe_trajectory_error(const NormEvaluator& norms, const std::vector<Vec>& u, const std::vector<Vec>& ref,
                             double tau) {
  try {
    std::vector<Vec> diff(u.size());
    for (std::size_t n = 0; n < u.size(); ++n) diff[n] = u[n] - ref[n];
    const double den = norms.trajectory_norm(ref, tau);
    const double e = norms.trajectory_norm(diff, tau);
    return den == 0.0 ? e : e / den;
  } catch (const NumericalError&) {
    return kNaN;
  }
}

std::string cell_tag(int N, int m) {
  return "H" + std::to_string(N) + "_m" + (m == kGlobalLayers ? std::string("inf") : std::to_string(m));
}

std::string tau_tag(double tau) {
  std::ostringstream o;
  o << "tau" << std::lround(1.0 / tau);
  return o.str();
}

/// Runs and bookkeeping shared by every command.
class Runner {
 public:
  Runner(Command command, const ExperimentConfig& config) : command_(command), cfg_(config) {
    out_ = fs::path(cfg_.output);
    std::error_code ec;
    fs::create_directories(out_ / "snapshots", ec);
    if (ec) throw IoError("cannot create output directory '" + cfg_.output + "': " + ec.message());
  }

  RunReport run() {
    switch (command_) {
      case Command::steady: steady(); break;
      case Command::transient: transient(false); break;
      case Command::nonlinear: transient(true); break;
      case Command::spectrum: spectrum(); break;
      case Command::reference: reference(); break;
      case Command::sweep:
        if (!cfg_.time.enabled)
          steady();
        else
          transient(builtin_reaction(cfg_.problem.reaction).active());
        break;
    }
    write_results();
    write_manifest();
    return report_;
  }

 private:
  ResultRow base_row(int N, int m, const Instance& inst) const {
    ResultRow r;
    r.command = std::string(to_string(command_));
    r.H = inst.grids().coarse.H();
    r.Nov = m;
    r.lm = cfg_.problem.lm;
    r.contrast = inst.medium().contrast();
    r.cflow = cfg_.problem.c_flow;
    if (inst.has_aux()) {
      const auto st = lambda_stats(inst.aux());
      r.Lambda = st.Lambda;
      r.LambdaPrime = st.Lambda_prime;
    } else {
      r.Lambda = r.LambdaPrime = kNaN;
    }
    r.E_a = r.E_L = r.D_a = r.D_L = r.N_a = r.N_L = kNaN;
    (void)N;
    return r;
  }

  void time(const std::string& phase, double seconds) { report_.timings[phase] += seconds; }

  std::unique_ptr<Instance> instance(int N, bool with_aux = true) {
    Clock c;
    auto inst = Instance::create(cfg_.problem, N, N, false, cfg_.threads);
    time("assembly", c.lap());
    if (with_aux) {
      inst->build_aux();
      time("spectral", c.lap());
    }
    return inst;
  }

  void snapshot(const std::string& name, const FineGrid& grid, const Vec& u) {
    const std::string rel = "snapshots/" + name + ".txt";
    write_snapshot((out_ / rel).string(), grid, u);
    report_.files.push_back(rel);
  }

  ProblemSpec reference_spec() const {
    ProblemSpec s = cfg_.problem;
    if (cfg_.reference.nx > 0) {
      s.nx = cfg_.reference.nx;
      s.ny = cfg_.reference.ny;
    }
    return s;
  }

  bool same_grid() const {
    return cfg_.reference.nx == 0 || (cfg_.reference.nx == cfg_.problem.nx && cfg_.reference.ny == cfg_.problem.ny);
  }

  void steady() {
    std::unique_ptr<Instance> ref_inst;
    Vec u_ref;
    std::map<int, std::pair<Vec, Vec>> global_correctors;
    for (auto [N, m] : cfg_.cells()) {
      Clock wall;
      auto inst = instance(N);
      const auto loads = inst->steady_loads();
      if (!ref_inst) {
        Clock c;
        ref_inst = same_grid() ? Instance::create(cfg_.problem, N, N, false, cfg_.threads)
                               : Instance::create(reference_spec(), 1, 1, false, cfg_.threads);
        u_ref = reference_steady(ref_inst->forms(), ref_inst->steady_loads());
        time("reference", c.lap());
        snapshot("steady_reference", ref_inst->grids().fine, u_ref);
      }
      Clock c;
      const bool neumann = inst->boundary().has_neumann();
      const auto off = build_offline(inst->inputs(), m, loads.g_tilde, neumann);
      time("offline", c.lap());
      const Vec N_total = neumann ? off.neumann.total : Vec(Vec::Zero(loads.g_tilde.size()));
      const auto sol = steady_solve(inst->forms(), off.basis, off.dirichlet.total, N_total, loads);
      time("solve", c.lap());

      ResultRow row = base_row(N, m, *inst);
      const NormEvaluator fine_norms(inst->forms(), &inst->pi());
      const NormEvaluator ref_norms(ref_inst->forms());
      const Vec u = same_grid() ? sol.u : prolongate(inst->grids().fine, sol.u, ref_inst->grids().fine);
      row.E_L = safe_error(ref_norms, NormKind::L2, u, u_ref);
      row.E_a = safe_error(ref_norms, NormKind::Acal, u, u_ref);
      if (cfg_.corrector_errors) {
        auto it = global_correctors.find(N);
        if (it == global_correctors.end()) {
          Vec D = dirichlet_corrector(inst->inputs(), kGlobalLayers, loads.g_tilde).total;
          Vec Nq = neumann ? neumann_corrector(inst->inputs(), kGlobalLayers).total : Vec();
          it = global_correctors.emplace(N, std::make_pair(std::move(D), std::move(Nq))).first;
          time("correctors", c.lap());
        }
        row.D_a = safe_error(fine_norms, NormKind::B, off.dirichlet.total, it->second.first);
        row.D_L = safe_error(fine_norms, NormKind::L2, off.dirichlet.total, it->second.first);
        if (neumann) {
          row.N_a = safe_error(fine_norms, NormKind::B, off.neumann.total, it->second.second);
          row.N_L = safe_error(fine_norms, NormKind::L2, off.neumann.total, it->second.second);
        }
      }
      snapshot("steady_" + cell_tag(N, m), inst->grids().fine, sol.u);
      row.wall_s = wall.lap();
      report_.rows.push_back(row);
    }
  }

  /// Reference trajectory sampled at the multiscale time nodes.
  std::vector<Vec> reference_trajectory(const Instance& ref, double tau) {
    const int steps = cfg_.reference.steps;
    const double tau_ref = cfg_.time.T / steps;
    const double stride_d = tau / tau_ref;
    const int stride = int(std::lround(stride_d));
    if (stride < 1 || std::abs(stride_d - stride) > 1e-9 * stride_d)
      throw ConfigError({"reference.steps: " + std::to_string(steps) + " reference steps do not refine tau = " +
                         num(tau)});
    Clock c;
    auto out = reference_transient(ref.forms(), cfg_.problem.transient_data(), tau_ref, steps, stride);
    time("reference", c.lap());
    return out;
  }

  void transient(bool nonlinear) {
    const TransientData data = cfg_.problem.transient_data();
    std::map<double, std::vector<Vec>> refs;
    std::unique_ptr<Instance> ref_base;
    const std::vector<Scheme> schemes = nonlinear ? std::vector<Scheme>{Scheme::cd} : cfg_.time.schemes;
    for (auto [N, m] : cfg_.cells()) {
      auto inst = instance(N);
      std::unique_ptr<Instance> ref_inst;
      if (!same_grid()) ref_inst = Instance::create(reference_spec(), N, N, true, cfg_.threads);
      const Instance& ref = same_grid() ? *inst : *ref_inst;
      Clock c;
      const auto basis = build_ms_basis(inst->inputs(), m);
      time("basis", c.lap());
      for (double tau : cfg_.time.tau) {
        auto rit = refs.find(tau);
        if (rit == refs.end()) {
          rit = refs.emplace(tau, reference_trajectory(ref, tau)).first;
          snapshot("transient_reference_" + tau_tag(tau), ref.grids().fine, rit->second.back());
        }
        const auto& u_ref = rit->second;
        for (Scheme scheme : schemes) {
          Clock wall;
          const SchemeConfig sc = make_scheme(tau, cfg_.time.T, scheme, cfg_.ode_substeps);
          const TransientContext ctx(inst->inputs(), basis, m, data, sc);
          time("correctors", c.lap());
          const auto res = nonlinear ? strang_solve(ctx) : transient_solve(ctx);
          time("solve", c.lap());
          report_.steps_logged = int(res.u.size()) - 1;

          ResultRow row = base_row(N, m, *inst);
          row.scheme = std::string(to_string(scheme));
          row.tau = tau;
          std::vector<Vec> u = res.u;
          if (!same_grid())
            for (auto& v : u) v = prolongate(inst->grids().fine, v, ref.grids().fine);
          const NormEvaluator norms(ref.forms(), &ref.pi());
          row.E_L = safe_error(norms, NormKind::L2, u.back(), u_ref.back());
          row.E_a = safe_trajectory_error(norms, u, u_ref, tau);
          if (cfg_.corrector_errors) {
            const NormEvaluator fine_norms(inst->forms(), &inst->pi());
            TransientCorrector dg(inst->inputs(), kGlobalLayers, scheme, CorrectorKind::dirichlet);
            CorrectorData cd;
            const auto& grid = inst->grids().fine;
            cd.g_tilde = [&](double t) { return interpolate(data.g, grid, t); };
            const auto D_glob = dg.march(cd, 0.0, tau, sc.steps);
            row.D_a = safe_error(fine_norms, NormKind::B, ctx.D(sc.steps), D_glob.back());
            row.D_L = safe_error(fine_norms, NormKind::L2, ctx.D(sc.steps), D_glob.back());
            if (inst->boundary().has_neumann()) {
              TransientCorrector ng(inst->inputs(), kGlobalLayers, scheme, CorrectorKind::neumann);
              const auto N_glob = ng.march(cd, 0.0, tau, sc.steps);
              row.N_a = safe_error(fine_norms, NormKind::B, ctx.N(sc.steps), N_glob.back());
              row.N_L = safe_error(fine_norms, NormKind::L2, ctx.N(sc.steps), N_glob.back());
            }
            time("correctors", c.lap());
          }
          snapshot(std::string(nonlinear ? "nonlinear_" : "transient_") + cell_tag(N, m) + "_" + tau_tag(tau) +
                       "_" + row.scheme,
                   inst->grids().fine, res.u.back());
          row.wall_s = wall.lap();
          report_.rows.push_back(row);
        }
      }
    }
  }

  void spectrum() {
    std::vector<int> done;
    for (auto [N, m] : cfg_.cells()) {
      if (std::find(done.begin(), done.end(), N) != done.end()) continue;
      done.push_back(N);
      Clock wall;
      auto inst = instance(N);
      const std::string rel = "spectrum_H" + std::to_string(N) + ".csv";
      std::ofstream os(out_ / rel);
      if (!os) throw IoError("cannot write '" + (out_ / rel).string() + "'");
      os << "element,k,re,im\n";
      for (const auto& e : inst->aux().elements())
        for (Index k = 0; k < e.lambda_re.size(); ++k)
          os << e.element << ',' << k + 1 << ',' << num(e.lambda_re[k]) << ',' << num(e.lambda_im[k]) << '\n';
      report_.files.push_back(rel);
      ResultRow row = base_row(N, 0, *inst);
      row.wall_s = wall.lap();
      report_.rows.push_back(row);
      (void)m;
    }
  }

  void reference() {
    Clock wall;
    auto ref = Instance::create(reference_spec(), 1, 1, false, cfg_.threads);
    ResultRow row;
    row.command = "reference";
    row.H = kNaN;
    row.contrast = ref->medium().contrast();
    row.cflow = cfg_.problem.c_flow;
    row.Lambda = row.LambdaPrime = row.E_a = row.E_L = row.D_a = row.D_L = row.N_a = row.N_L = kNaN;
    if (cfg_.time.enabled) {
      const int steps = cfg_.reference.steps;
      const auto u =
          reference_transient(ref->forms(), cfg_.problem.transient_data(), cfg_.time.T / steps, steps);
      row.tau = cfg_.time.T / steps;
      snapshot("reference_final", ref->grids().fine, u.back());
    } else {
      snapshot("reference_steady", ref->grids().fine, reference_steady(ref->forms(), ref->steady_loads()));
    }
    row.wall_s = wall.lap();
    time("reference", row.wall_s);
    report_.rows.push_back(row);
  }

  void write_results() {
    {
      std::ofstream os(out_ / "results.csv");
      if (!os) throw IoError("cannot write results.csv in '" + cfg_.output + "'");
      os << kResultsHeader << '\n';
      for (const auto& r : report_.rows) os << format_row(r) << '\n';
      report_.files.push_back("results.csv");
    }
    std::ofstream os(out_ / "convergence.csv");
    if (!os) throw IoError("cannot write convergence.csv in '" + cfg_.output + "'");
    os << "command,scheme,tau,H,Nov,E_L,E_L_ratio_percent,E_a,E_a_ratio_percent\n";
    // Consecutive rows with the same (scheme, tau) form one refinement series.
    std::map<std::pair<std::string, double>, std::vector<const ResultRow*>> series;
    std::vector<std::pair<std::string, double>> order;
    for (const auto& r : report_.rows) {
      const auto key = std::make_pair(r.scheme, r.tau);
      if (!series.count(key)) order.push_back(key);
      series[key].push_back(&r);
    }
    for (const auto& key : order) {
      const auto& rows = series[key];
      std::vector<std::pair<double, double>> eL, ea;
      for (const auto* r : rows) {
        eL.emplace_back(r->H, r->E_L);
        ea.emplace_back(r->H, r->E_a);
      }
      const auto tL = convergence_table(eL);
      const auto ta = convergence_table(ea);
      for (std::size_t k = 0; k < rows.size(); ++k) {
        const auto* r = rows[k];
        os << r->command << ',' << r->scheme << ',' << num(r->tau) << ',' << num(r->H) << ',' << r->Nov << ','
           << num(r->E_L) << ',' << num(tL[k].ratio_percent.value_or(kNaN)) << ',' << num(r->E_a) << ','
           << num(ta[k].ratio_percent.value_or(kNaN)) << '\n';
      }
    }
    report_.files.push_back("convergence.csv");
  }

  void write_manifest() {
    using nlohmann::json;
    json j;
    j["command"] = std::string(to_string(command_));
    j["config"] = cfg_.resolved;
    j["config_text"] = dump_config(cfg_);
    j["versions"] = {{"cemflow", CEMFLOW_VERSION},
                     {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                   std::to_string(EIGEN_MINOR_VERSION)},
                     {"compiler", __VERSION__}};
    ExperimentConfig inputs = cfg_;
    inputs.output = "-";
    inputs.threads = 1;
    std::uint64_t h = fnv1a(dump_config(inputs));
    if (!cfg_.problem.medium_file.empty()) {
      std::ifstream in(cfg_.problem.medium_file, std::ios::binary);
      std::ostringstream ss;
      ss << in.rdbuf();
      h = fnv1a(ss.str(), h);
    }
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    j["input_hash_fnv1a"] = buf;
    j["timings_s"] = report_.timings;
    j["domain"] = {{"x_min", cfg_.problem.domain.x_min},
                   {"x_max", cfg_.problem.domain.x_max},
                   {"y_min", cfg_.problem.domain.y_min},
                   {"y_max", cfg_.problem.domain.y_max}};
    report_.files.push_back("manifest.json");
    j["files"] = report_.files;
    std::ofstream os(out_ / "manifest.json");
    if (!os) throw IoError("cannot write manifest.json in '" + cfg_.output + "'");
    os << j.dump(2) << '\n';
  }

  Command command_;
  const ExperimentConfig& cfg_;
  fs::path out_;
  RunReport report_;
};

}  // namespace

std::string format_row(const ResultRow& r) {
  std::ostringstream o;
  o << r.command << ',' << num(r.H) << ',' << r.Nov << ',' << r.lm << ',' << num(r.contrast) << ',' << num(r.cflow)
    << ',' << r.scheme << ',' << num(r.tau) << ',' << num(r.Lambda) << ',' << num(r.LambdaPrime) << ','
    << num(r.E_a) << ',' << num(r.E_L) << ',' << num(r.D_a) << ',' << num(r.D_L) << ',' << num(r.N_a) << ','
    << num(r.N_L) << ',' << num(r.wall_s);
  return o.str();
}

RunReport run_experiment(Command command, const ExperimentConfig& config) {
  validate_config(config);
  return Runner(command, config).run();
}

void write_snapshot(const std::string& path, const FineGrid& grid, const Vec& u) {
  CEMFLOW_REQUIRE(u.size() == grid.num_nodes(), InvalidArgument, "snapshot: vector size does not match the grid");
  std::ofstream os(path);
  if (!os) throw IoError("cannot write snapshot '" + path + "'");
  char buf[32];
  for (int j = 0; j <= grid.ny(); ++j) {
    for (int i = 0; i <= grid.nx(); ++i) {
      std::snprintf(buf, sizeof buf, "%.10e", u[grid.node(i, j)]);
      os << (i ? " " : "") << buf;
    }
    os << '\n';
  }
}

Mat read_snapshot(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open snapshot '" + path + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    rows.emplace_back();
    double v;
    while (ls >> v) rows.back().push_back(v);
  }
  CEMFLOW_REQUIRE(!rows.empty(), IoError, "snapshot '" + path + "' is empty");
  Mat m(Index(rows.size()), Index(rows[0].size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    CEMFLOW_REQUIRE(rows[r].size() == rows[0].size(), IoError, "snapshot '" + path + "' has ragged rows");
    for (std::size_t c = 0; c < rows[r].size(); ++c) m(Index(r), Index(c)) = rows[r][c];
  }
  return m;
}

std::uint64_t fnv1a(std::string_view data, std::uint64_t h) {
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace cemflow
