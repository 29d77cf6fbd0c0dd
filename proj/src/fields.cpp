#include "cemflow/fields.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "cemflow/error.hpp"

namespace cemflow {

MediumField::MediumField(int nx, int ny, std::vector<double> kappa)
    : nx_(nx), ny_(ny), kappa_(std::move(kappa)) {
  CEMFLOW_REQUIRE(kappa_.size() == std::size_t(nx) * std::size_t(ny), InvalidArgument,
                  "medium: expected nx*ny cell values");
  for (double k : kappa_)
    CEMFLOW_REQUIRE(std::isfinite(k) && k > 0.0, InvalidArgument, "medium: kappa must be positive");
  const auto [lo, hi] = std::minmax_element(kappa_.begin(), kappa_.end());
  kmin_ = *lo;
  kmax_ = *hi;
}

MediumPattern medium_pattern_from_string(std::string_view name) {
  if (name == "uniform") return MediumPattern::uniform;
  if (name == "inclusions") return MediumPattern::inclusions;
  if (name == "channels") return MediumPattern::channels;
  throw InvalidArgument("unknown medium pattern '" + std::string(name) + "'");
}

namespace {

struct Box {
  double x0, x1, y0, y1;
  bool contains(double x, double y) const { return x >= x0 && x <= x1 && y >= y0 && y <= y1; }
};

class Uniform01 {
 public:
  explicit Uniform01(std::uint64_t seed) : engine_(seed) {}
  double operator()() { return double(engine_() >> 11) * 0x1.0p-53; }
  double operator()(double lo, double hi) { return lo + (hi - lo) * (*this)(); }

 private:
  std::mt19937_64 engine_;
};

std::vector<Box> medium_shapes(MediumPattern pattern, std::uint64_t seed) {
  std::vector<Box> boxes;
  if (pattern == MediumPattern::uniform) return boxes;
  Uniform01 u(seed);
  if (pattern == MediumPattern::channels) {
    for (int k = 0; k < 9; ++k) {
      const double y = 0.1 * (k + 1) + u(-0.02, 0.02) - 0.0075;
      const double w = u(0.01, 0.02);
      const double len = u(0.4, 0.9);
      const double x = u(0.0, 1.0 - len);
      boxes.push_back({x, x + len, y, y + w});
    }
  }
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) {
      const double cx = 0.2 * i + u(0.05, 0.15);
      const double cy = 0.2 * j + u(0.05, 0.15);
      const double wx = u(0.01, 0.03);
      const double wy = u(0.01, 0.03);
      boxes.push_back({cx - wx / 2, cx + wx / 2, cy - wy / 2, cy + wy / 2});
    }
  return boxes;
}

}  // namespace

MediumField builtin_medium(const FineGrid& grid, double contrast, MediumPattern pattern,
                           std::uint64_t seed) {
  CEMFLOW_REQUIRE(contrast >= 1.0, InvalidArgument, "builtin_medium: contrast must be >= 1");
  const auto boxes = medium_shapes(pattern, seed);
  const auto& d = grid.domain();
  std::vector<double> kappa(std::size_t(grid.num_cells()), 1.0);
  bool any = false;
  for (Index c = 0; c < grid.num_cells(); ++c) {
    const Eigen::Vector2d o = grid.cell_origin(c);
    // Unit-square coordinates of the cell center.
    const double x = (o.x() + 0.5 * grid.hx() - d.x_min) / (d.x_max - d.x_min);
    const double y = (o.y() + 0.5 * grid.hy() - d.y_min) / (d.y_max - d.y_min);
    for (const auto& b : boxes) {
      if (b.contains(x, y)) {
        kappa[std::size_t(c)] = contrast;
        any = true;
        break;
      }
    }
  }
  // Coarse grids may miss every shape; keep the stated contrast exact.
  if (!any && pattern != MediumPattern::uniform && contrast > 1.0)
    kappa[std::size_t(grid.cell(grid.nx() / 2, grid.ny() / 2))] = contrast;
  return MediumField(grid.nx(), grid.ny(), std::move(kappa));
}

MediumField load_medium(const std::string& path, const FineGrid& grid) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open medium file '" + path + "'");
  const bool csv = path.size() >= 4 && path.substr(path.size() - 4) == ".csv";
  std::vector<std::vector<double>> rows;
  std::string line;
  int fx = 0;
  int fy = 0;
  if (!csv) {
    if (!std::getline(in, line)) throw IoError("medium file '" + path + "' is empty");
    std::istringstream head(line);
    if (!(head >> fx >> fy) || fx < 1 || fy < 1)
      throw IoError("medium file '" + path + "': bad header, expected 'nx ny'");
  }
  while (std::getline(in, line)) {
    if (csv) std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream row(line);
    std::vector<double> values;
    double v;
    while (row >> v) values.push_back(v);
    if (!row.eof()) throw IoError("medium file '" + path + "': unparsable value");
    if (!values.empty()) rows.push_back(std::move(values));
  }
  if (csv) {
    fy = int(rows.size());
    fx = fy > 0 ? int(rows.front().size()) : 0;
  }
  if (int(rows.size()) != fy || fx < 1) throw IoError("medium file '" + path + "': wrong row count");
  for (const auto& r : rows)
    if (int(r.size()) != fx) throw IoError("medium file '" + path + "': ragged rows");

  const auto& d = grid.domain();
  std::vector<double> kappa(std::size_t(grid.num_cells()));
  for (Index c = 0; c < grid.num_cells(); ++c) {
    const Eigen::Vector2d o = grid.cell_origin(c);
    const double x = (o.x() + 0.5 * grid.hx() - d.x_min) / (d.x_max - d.x_min);
    const double y = (o.y() + 0.5 * grid.hy() - d.y_min) / (d.y_max - d.y_min);
    const int i = std::min(fx - 1, int(x * fx));
    const int j = std::min(fy - 1, int(y * fy));
    kappa[std::size_t(c)] = rows[std::size_t(j)][std::size_t(i)];
  }
  return MediumField(grid.nx(), grid.ny(), std::move(kappa));
}

VelocityMode velocity_mode_from_string(std::string_view name) {
  if (name == "vortex") return VelocityMode::vortex;
  if (name == "inflow") return VelocityMode::inflow;
  if (name == "outflow") return VelocityMode::outflow;
  if (name == "custom") return VelocityMode::custom;
  throw InvalidArgument("unknown velocity mode '" + std::string(name) + "'");
}

std::string_view to_string(VelocityMode mode) {
  switch (mode) {
    case VelocityMode::vortex: return "vortex";
    case VelocityMode::inflow: return "inflow";
    case VelocityMode::outflow: return "outflow";
    case VelocityMode::custom: return "custom";
  }
  return "?";
}

VelocityField::VelocityField(VelocityMode mode, double c_flow, Eigen::Vector2d constant)
    : mode_(mode), c_flow_(c_flow), constant_(std::move(constant)) {}

Eigen::Vector2d VelocityField::operator()(double x, double y) const {
  constexpr double k = 18.0 * std::numbers::pi;
  if (mode_ == VelocityMode::custom) return constant_;
  Eigen::Vector2d b(std::cos(k * y) * std::sin(k * x), -std::cos(k * x) * std::sin(k * y));
  if (mode_ == VelocityMode::vortex) return b;
  b += c_flow_ * Eigen::Vector2d(0.5 - x, y);
  return mode_ == VelocityMode::outflow ? Eigen::Vector2d(-b) : b;
}

double VelocityField::divergence(double x, double y) const {
  constexpr double k = 18.0 * std::numbers::pi;
  if (mode_ == VelocityMode::custom) return 0.0;
  double div = k * std::cos(k * y) * std::cos(k * x) - k * std::cos(k * x) * std::cos(k * y);
  if (mode_ != VelocityMode::vortex) div += c_flow_ * (-1.0 + 1.0);
  return mode_ == VelocityMode::outflow ? -div : div;
}

KappaScale kappa_scale_from_string(std::string_view name) {
  if (name == "global") return KappaScale::global;
  if (name == "element") return KappaScale::element;
  if (name == "cell") return KappaScale::cell;
  throw InvalidArgument("unknown kappa scale '" + std::string(name) + "'");
}

std::string_view to_string(KappaScale scale) {
  switch (scale) {
    case KappaScale::global: return "global";
    case KappaScale::element: return "element";
    case KappaScale::cell: return "cell";
  }
  return "?";
}

KappaTilde::KappaTilde(const GridPair& grids, const MediumField& medium, const VelocityField& velocity, double C,
                       KappaScale scale)
    : velocity_(velocity), H_(grids.coarse.H()), C_(C) {
  CEMFLOW_REQUIRE(H_ > 0.0, InvalidArgument, "kappa_tilde: H must be positive");
  CEMFLOW_REQUIRE(C > 0.0, InvalidArgument, "kappa_tilde: C must be positive");
  const auto& fine = grids.fine;
  CEMFLOW_REQUIRE(medium.nx() == fine.nx() && medium.ny() == fine.ny(), InvalidArgument,
                  "kappa_tilde: medium does not match the fine grid");
  const Index nc = fine.num_cells();
  kappa1_.assign(std::size_t(nc), medium.kappa_max());
  if (scale == KappaScale::cell) {
    for (Index c = 0; c < nc; ++c) kappa1_[std::size_t(c)] = medium.values()[std::size_t(c)];
  } else if (scale == KappaScale::element) {
    for (Index e = 0; e < grids.coarse.num_elements(); ++e) {
      double k1 = 0.0;
      for (Index c : grids.coarse.fine_cells(e)) k1 = std::max(k1, medium.values()[std::size_t(c)]);
      for (Index c : grids.coarse.fine_cells(e)) kappa1_[std::size_t(c)] = k1;
    }
  }
}

double KappaTilde::operator()(double x, double y, Index cell) const {
  const double b2 = velocity_(x, y).squaredNorm();
  return C_ / (H_ * H_) * kappa1_[std::size_t(cell)] * std::max(b2, 1.0);
}

namespace {

double g_exp(double x, double y) { return x * x + std::exp(x * y); }

}  // namespace

SpaceTimeFunction builtin_function(std::string_view name) {
  using std::numbers::pi;
  const std::string n(name);
  auto zero = [](double, double, double) { return 0.0; };
  if (name == "zero") return {n, zero, zero};
  if (name == "one") return {n, [](double, double, double) { return 1.0; }, zero};
  if (name == "x1") return {n, [](double x, double, double) { return x; }, zero};
  if (name == "x1sq_plus_exp")
    return {n, [](double x, double y, double) { return g_exp(x, y); }, zero};
  if (name == "decay_exp")
    return {n, [](double x, double y, double t) { return g_exp(x, y) * std::exp(-t); },
            [](double x, double y, double t) { return -g_exp(x, y) * std::exp(-t); }};
  if (name == "sin_sin")
    return {n, [](double x, double y, double) { return std::sin(pi * x) * std::sin(pi * y); }, zero};
  if (name == "mms_source")
    return {n,
            [](double x, double y, double) {
              return 2.0 * pi * pi * std::sin(pi * x) * std::sin(pi * y) + pi * std::cos(pi * x) * std::sin(pi * y);
            },
            zero};
  if (name == "bump")
    return {n,
            [](double x, double y, double) {
              return std::exp(-40.0 * ((x - 0.5) * (x - 0.5) + (y - 0.5) * (y - 0.5)));
            },
            zero};
  if (name == "gauss_pair")
    return {n,
            [](double x, double y, double) {
              const double a = (x - 0.3) * (x - 0.3) + (y - 0.3) * (y - 0.3);
              const double b = (x - 0.7) * (x - 0.7) + (y - 0.7) * (y - 0.7);
              return 10.0 * (std::exp(-50.0 * a) - std::exp(-50.0 * b));
            },
            zero};
  throw InvalidArgument("unknown function '" + n + "'");
}

std::vector<std::string> builtin_function_names() {
  return {"zero", "one", "x1", "x1sq_plus_exp", "decay_exp", "sin_sin", "mms_source", "bump", "gauss_pair"};
}

double RobinCoefficient::operator()(const MediumField& medium, Index cell) const {
  switch (mode) {
    case RobinMode::zero: return 0.0;
    case RobinMode::kappa: return medium[cell];
    case RobinMode::constant: return value;
  }
  return 0.0;
}

RobinMode robin_mode_from_string(std::string_view name) {
  if (name == "zero") return RobinMode::zero;
  if (name == "kappa") return RobinMode::kappa;
  if (name == "constant") return RobinMode::constant;
  throw InvalidArgument("unknown Robin coefficient '" + std::string(name) + "'");
}

Reaction builtin_reaction(std::string_view name) {
  if (name == "none") return {"none", {}, {}};
  if (name == "linear") return {"linear", [](double u) { return u; }, [](double) { return 1.0; }};
  if (name == "allen_cahn")
    return {"allen_cahn", [](double u) { return u - u * u * u; }, [](double u) { return 1.0 - 3.0 * u * u; }};
  throw InvalidArgument("unknown reaction '" + std::string(name) + "'");
}

}  // namespace cemflow
