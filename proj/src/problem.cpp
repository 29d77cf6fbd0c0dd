#include "cemflow/problem.hpp"

#include "cemflow/error.hpp"

namespace cemflow {

TransientData ProblemSpec::transient_data() const {
  return TransientData{builtin_function(g), builtin_function(f), builtin_function(u_init), builtin_reaction(reaction)};
}

std::vector<BoundarySegment> dirichlet_layout() {
  std::vector<BoundarySegment> s;
  for (Side side : {Side::left, Side::right, Side::bottom, Side::top})
    s.push_back({side, 0.0, 1.0, BoundaryKind::dirichlet, 0.0});
  return s;
}

std::vector<BoundarySegment> robin_layout(double q_left, double q_right, double q_bottom_left,
                                          double q_bottom_right) {
  return {{Side::left, 0.0, 1.0, BoundaryKind::neumann_robin, q_left},
          {Side::right, 0.0, 1.0, BoundaryKind::neumann_robin, q_right},
          {Side::bottom, 0.0, 0.5, BoundaryKind::neumann_robin, q_bottom_left},
          {Side::bottom, 0.5, 1.0, BoundaryKind::neumann_robin, q_bottom_right},
          {Side::top, 0.0, 1.0, BoundaryKind::dirichlet, 0.0}};
}

std::vector<BoundarySegment> segments_on_domain(const DomainSpec& d, std::vector<BoundarySegment> segments) {
  for (auto& s : segments) {
    const bool vertical = s.side == Side::left || s.side == Side::right;
    const double lo = vertical ? d.y_min : d.x_min;
    const double len = vertical ? d.y_max - d.y_min : d.x_max - d.x_min;
    s.from = lo + s.from * len;
    s.to = lo + s.to * len;
  }
  return segments;
}

namespace {

MediumField make_medium(const ProblemSpec& spec, const FineGrid& grid) {
  if (!spec.medium_file.empty()) return load_medium(spec.medium_file, grid);
  return builtin_medium(grid, spec.contrast, spec.pattern, spec.medium_seed);
}

BoundaryPartition make_boundary(const ProblemSpec& spec, const FineGrid& grid) {
  if (spec.segments.empty()) return all_dirichlet(grid);
  return classify_boundary(grid, segments_on_domain(grid.domain(), spec.segments));
}

}  // namespace

Instance::Instance(const ProblemSpec& spec, int Nx, int Ny, int threads)
    : spec_(spec),
      grids_(build_grids(spec.domain, spec.nx, spec.ny, Nx, Ny)),
      medium_(make_medium(spec, grids_.fine)),
      velocity_(spec.velocity, spec.c_flow, spec.custom_velocity),
      boundary_(make_boundary(spec, grids_.fine)),
      forms_(assemble_forms(grids_, medium_, velocity_, boundary_, spec.robin, spec.C, spec.kappa_scale)),
      threads_(threads) {}

std::unique_ptr<Instance> Instance::create(const ProblemSpec& spec, int Nx, int Ny, bool with_aux, int threads) {
  std::unique_ptr<Instance> inst(new Instance(spec, Nx, Ny, threads));
  if (with_aux) inst->build_aux();
  return inst;
}

void Instance::build_aux() {
  if (aux_) return;
  SpectralOptions opt;
  opt.lm = spec_.lm;
  opt.symmetrize = spec_.symmetrize;
  aux_.emplace(build_aux_space(forms_, opt, threads_));
  pi_.emplace(forms_, *aux_);
}

const AuxSpace& Instance::aux() const {
  CEMFLOW_REQUIRE(aux_.has_value(), InvalidArgument, "instance was built without the auxiliary space");
  return *aux_;
}

const PiProjector& Instance::pi() const {
  CEMFLOW_REQUIRE(pi_.has_value(), InvalidArgument, "instance was built without the auxiliary space");
  return *pi_;
}

CemInputs Instance::inputs() const { return CemInputs{&forms_, &aux(), threads_}; }

SteadyLoads Instance::steady_loads() const {
  return cemflow::steady_loads(forms_, builtin_function(spec_.g), builtin_function(spec_.f));
}

}  // namespace cemflow
