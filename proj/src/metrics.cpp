#include "cemflow/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "cemflow/error.hpp"

namespace cemflow {

std::string_view to_string(NormKind kind) {
  switch (kind) {
    case NormKind::L2: return "L2";
    case NormKind::a: return "a";
    case NormKind::Acal: return "Acal";
    case NormKind::s: return "s";
    case NormKind::B: return "B";
    case NormKind::E: return "E";
  }
  return "?";
}

NormKind norm_kind_from_string(std::string_view name) {
  for (NormKind k : {NormKind::L2, NormKind::a, NormKind::Acal, NormKind::s, NormKind::B, NormKind::E})
    if (to_string(k) == name) return k;
  throw InvalidArgument("unknown norm kind '" + std::string(name) + "'");
}

NormEvaluator::NormEvaluator(const AssembledForms& forms, const PiProjector* pi) : forms_(&forms), pi_(pi) {}

double NormEvaluator::squared(NormKind kind, const Vec& v) const {
  CEMFLOW_REQUIRE(v.size() == forms_->grids().fine.num_nodes(), InvalidArgument,
                  "norm: vector size does not match the fine grid");
  double q = 0.0;
  switch (kind) {
    case NormKind::L2: q = v.dot(forms_->M * v); break;
    case NormKind::a: q = v.dot(forms_->a * v); break;
    case NormKind::Acal: q = v.dot(forms_->quasi * v); break;
    case NormKind::s: q = v.dot(forms_->S * v); break;
    case NormKind::B:
      CEMFLOW_REQUIRE(pi_ != nullptr, InvalidArgument, "B-norm needs the projection pi");
      q = v.dot(forms_->quasi * v) + pi_->coefficients(v).squaredNorm();
      break;
    case NormKind::E: throw InvalidArgument("E-norm needs a trajectory");
  }
  const double scale = std::max(1.0, v.squaredNorm());
  if (q < -1e-12 * scale)
    throw NumericalError("norm '" + std::string(to_string(kind)) + "' is indefinite: quadratic value " +
                         std::to_string(q));
  return std::max(q, 0.0);
}

double NormEvaluator::norm(NormKind kind, const Vec& v) const { return std::sqrt(squared(kind, v)); }

double NormEvaluator::trajectory_norm(const std::vector<Vec>& v, double tau) const {
  CEMFLOW_REQUIRE(!v.empty(), InvalidArgument, "trajectory norm of an empty trajectory");
  double total = squared(NormKind::L2, v.back());
  for (std::size_t n = 0; n + 1 < v.size(); ++n) total += tau * squared(NormKind::B, v[n]);
  return std::sqrt(total);
}

double compute_norm(NormKind kind, const AssembledForms& forms, const Vec& v, const PiProjector* pi) {
  return NormEvaluator(forms, pi).norm(kind, v);
}

RelativeError relative_error(const NormEvaluator& norms, NormKind kind, const Vec& u_ms, const Vec& u_ref) {
  CEMFLOW_REQUIRE(u_ms.size() == u_ref.size(), InvalidArgument, "relative_error: size mismatch");
  const double den = norms.norm(kind, u_ref);
  const double num = norms.norm(kind, u_ms - u_ref);
  if (den == 0.0) return {num, true};
  return {num / den, false};
}

Vec prolongate(const FineGrid& from, const Vec& u, const FineGrid& to) {
  CEMFLOW_REQUIRE(u.size() == from.num_nodes(), InvalidArgument, "prolongate: size mismatch");
  Vec out(to.num_nodes());
  const auto& d = from.domain();
  for (Index n = 0; n < to.num_nodes(); ++n) {
    const Eigen::Vector2d p = to.node_point(n);
    const double fx = std::clamp((p.x() - d.x_min) / from.hx(), 0.0, double(from.nx()));
    const double fy = std::clamp((p.y() - d.y_min) / from.hy(), 0.0, double(from.ny()));
    const int i = std::min(int(fx), from.nx() - 1);
    const int j = std::min(int(fy), from.ny() - 1);
    const double sx = fx - i;
    const double sy = fy - j;
    out[n] = (1 - sx) * (1 - sy) * u[from.node(i, j)] + sx * (1 - sy) * u[from.node(i + 1, j)] +
             sx * sy * u[from.node(i + 1, j + 1)] + (1 - sx) * sy * u[from.node(i, j + 1)];
  }
  return out;
}

std::vector<ConvergenceRow> convergence_table(const std::vector<std::pair<double, double>>& H_and_error) {
  std::vector<ConvergenceRow> rows;
  for (std::size_t k = 0; k < H_and_error.size(); ++k) {
    ConvergenceRow r{H_and_error[k].first, H_and_error[k].second, std::nullopt};
    if (k > 0 && H_and_error[k - 1].second != 0.0) r.ratio_percent = 100.0 * r.error / H_and_error[k - 1].second;
    rows.push_back(r);
  }
  return rows;
}

}  // namespace cemflow
