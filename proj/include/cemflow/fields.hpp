#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "cemflow/grid.hpp"
#include "cemflow/types.hpp"

namespace cemflow {

/// Piecewise-constant scalar diffusivity, one value per fine cell.
class MediumField {
 public:
  MediumField(int nx, int ny, std::vector<double> kappa);

  int nx() const noexcept { return nx_; }
  int ny() const noexcept { return ny_; }
  double operator[](Index cell) const { return kappa_[std::size_t(cell)]; }
  const std::vector<double>& values() const noexcept { return kappa_; }
  double kappa_min() const noexcept { return kmin_; }
  double kappa_max() const noexcept { return kmax_; }
  double contrast() const noexcept { return kmax_ / kmin_; }

 private:
  int nx_;
  int ny_;
  std::vector<double> kappa_;
  double kmin_;
  double kmax_;
};

enum class MediumPattern : std::uint8_t { uniform, inclusions, channels };

MediumPattern medium_pattern_from_string(std::string_view name);

/// Background 1, inclusions equal to `contrast`. Shapes are drawn in physical
/// coordinates of the unit square from `seed` and sampled at cell centers, so
/// the same seed gives the same geometry on every resolution.
MediumField builtin_medium(const FineGrid& grid, double contrast, MediumPattern pattern,
                           std::uint64_t seed);

/// Plain-text "nx ny" header followed by ny rows of nx values (row 0 is the
/// bottom), or comma-separated values without header when the path ends in
/// ".csv". The file grid is sampled at the cell centers of `grid`.
MediumField load_medium(const std::string& path, const FineGrid& grid);

enum class VelocityMode : std::uint8_t { vortex, inflow, outflow, custom };

VelocityMode velocity_mode_from_string(std::string_view name);
std::string_view to_string(VelocityMode mode);

class VelocityField {
 public:
  VelocityField(VelocityMode mode, double c_flow, Eigen::Vector2d constant = Eigen::Vector2d::Zero());

  static VelocityField zero() { return {VelocityMode::custom, 0.0}; }

  VelocityMode mode() const noexcept { return mode_; }
  double c_flow() const noexcept { return c_flow_; }
  Eigen::Vector2d operator()(double x, double y) const;
  Eigen::Vector2d operator()(const Eigen::Vector2d& p) const { return (*this)(p.x(), p.y()); }
  /// Analytic divergence (zero for every mode).
  double divergence(double x, double y) const;

 private:
  VelocityMode mode_;
  double c_flow_;
  Eigen::Vector2d constant_;
};

/// Which bound of kappa enters kappa_tilde: the global maximum, the maximum
/// over the coarse element containing x, or kappa itself.
enum class KappaScale { global, element, cell };

KappaScale kappa_scale_from_string(std::string_view name);
std::string_view to_string(KappaScale scale);

/// kappa_tilde(x) = C * H^-2 * kappa_1 * max(|beta(x)|^2, 1).
class KappaTilde {
 public:
  KappaTilde(const GridPair& grids, const MediumField& medium, const VelocityField& velocity, double C = 24.0,
             KappaScale scale = KappaScale::global);

  /// x lies in fine cell `cell`.
  double operator()(double x, double y, Index cell) const;
  double C() const noexcept { return C_; }
  double H() const noexcept { return H_; }
  double kappa1(Index cell) const { return kappa1_[std::size_t(cell)]; }

 private:
  VelocityField velocity_;
  double H_;
  double C_;
  std::vector<double> kappa1_;
};

/// A named closed form g(x, y, t) with an optional analytic time derivative.
struct SpaceTimeFunction {
  std::string name;
  std::function<double(double, double, double)> value;
  std::function<double(double, double, double)> dt;  ///< empty when unknown

  double operator()(double x, double y, double t = 0.0) const { return value(x, y, t); }
  bool has_dt() const { return static_cast<bool>(dt); }
};

/// Catalog: zero, one, x1, x1sq_plus_exp, decay_exp, sin_sin, mms_source, bump, gauss_pair.
SpaceTimeFunction builtin_function(std::string_view name);
std::vector<std::string> builtin_function_names();

enum class RobinMode : std::uint8_t { zero, kappa, constant };

struct RobinCoefficient {
  RobinMode mode = RobinMode::zero;
  double value = 0.0;

  double operator()(const MediumField& medium, Index cell) const;
};

RobinMode robin_mode_from_string(std::string_view name);

/// Pointwise reaction term f(u) for the nonlinear problem.
struct Reaction {
  std::string name;
  std::function<double(double)> f;
  std::function<double(double)> df;

  bool active() const { return static_cast<bool>(f); }
};

/// "none", "linear" (u) or "allen_cahn" (u - u^3).
Reaction builtin_reaction(std::string_view name);

}  // namespace cemflow
