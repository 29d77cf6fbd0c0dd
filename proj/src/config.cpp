#include "cemflow/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "cemflow/error.hpp"

namespace cemflow {

std::string_view to_string(Scheme scheme) { return scheme == Scheme::cd ? "cd" : "diffusion"; }

Scheme scheme_from_string(std::string_view name) {
  if (name == "cd") return Scheme::cd;
  if (name == "diffusion") return Scheme::diffusion;
  throw InvalidArgument("unknown scheme '" + std::string(name) + "'");
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <class T>
bool parse_number(const std::string& text, T& out) {
  const char* b = text.data();
  const char* e = text.data() + text.size();
  if constexpr (std::is_floating_point_v<T>) {
    if (text.empty()) return false;
    char* end = nullptr;
    out = std::strtod(b, &end);
    return end == e && std::isfinite(out);
  } else {
    const auto r = std::from_chars(b, e, out);
    return r.ec == std::errc() && r.ptr == e;
  }
}

std::string pattern_name(MediumPattern p) {
  switch (p) {
    case MediumPattern::uniform: return "uniform";
    case MediumPattern::inclusions: return "inclusions";
    case MediumPattern::channels: return "channels";
  }
  return "?";
}

std::string robin_name(RobinMode m) {
  switch (m) {
    case RobinMode::zero: return "zero";
    case RobinMode::kappa: return "kappa";
    case RobinMode::constant: return "constant";
  }
  return "?";
}

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

template <class T, class F>
std::string join(const std::vector<T>& v, F&& f) {
  std::string out;
  for (std::size_t k = 0; k < v.size(); ++k) out += (k ? ", " : "") + f(v[k]);
  return out;
}

/// Reads typed values from a flat section.key map, recording every issue.
class Reader {
 public:
  explicit Reader(std::map<std::string, std::string> values) : values_(std::move(values)) {}

  std::vector<std::string>& issues() { return issues_; }

  const std::string* raw(const std::string& key) {
    known_.insert(key);
    const auto it = values_.find(key);
    return it == values_.end() ? nullptr : &it->second;
  }

  template <class T>
  void number(const std::string& key, T& out) {
    if (const auto* v = raw(key)) {
      T tmp{};
      if (parse_number(*v, tmp))
        out = tmp;
      else
        issues_.push_back(key + ": expected a number, got '" + *v + "'");
    }
  }

  template <class T>
  void list(const std::string& key, std::vector<T>& out) {
    if (const auto* v = raw(key)) {
      std::vector<T> tmp;
      for (const auto& item : split(*v, ',')) {
        T x{};
        if (!parse_number(item, x)) {
          issues_.push_back(key + ": expected a comma separated list of numbers, got '" + *v + "'");
          return;
        }
        tmp.push_back(x);
      }
      out = std::move(tmp);
    }
  }

  void text(const std::string& key, std::string& out) {
    if (const auto* v = raw(key)) out = *v;
  }

  void boolean(const std::string& key, bool& out) {
    if (const auto* v = raw(key)) {
      if (*v == "true" || *v == "1" || *v == "yes")
        out = true;
      else if (*v == "false" || *v == "0" || *v == "no")
        out = false;
      else
        issues_.push_back(key + ": expected true or false, got '" + *v + "'");
    }
  }

  /// Applies a string converter that throws InvalidArgument on bad input.
  template <class T, class F>
  void choice(const std::string& key, T& out, F&& convert) {
    if (const auto* v = raw(key)) {
      try {
        out = convert(*v);
      } catch (const InvalidArgument& e) {
        issues_.push_back(key + ": " + e.what());
      }
    }
  }

  void reject_unknown() {
    for (const auto& [key, value] : values_)
      if (!known_.count(key)) issues_.push_back("unknown key '" + key + "'");
  }

 private:
  std::map<std::string, std::string> values_;
  std::set<std::string> known_;
  std::vector<std::string> issues_;
};

std::vector<BoundarySegment> parse_side(Side side, const std::string& text, std::vector<std::string>& issues) {
  std::vector<BoundarySegment> out;
  const std::string key = "boundary." + std::string(to_string(side));
  for (const auto& item : split(text, ',')) {
    BoundarySegment seg{side, 0.0, 1.0, BoundaryKind::dirichlet, 0.0};
    std::string head = item;
    if (const auto at = item.find('@'); at != std::string::npos) {
      head = trim(item.substr(0, at));
      const auto range = split(item.substr(at + 1), ':');
      if (range.size() != 2 || !parse_number(range[0], seg.from) || !parse_number(range[1], seg.to)) {
        issues.push_back(key + ": bad interval in '" + item + "', expected kind[:q]@from:to");
        continue;
      }
    }
    const auto parts = split(head, ':');
    if (parts[0] == "dirichlet") {
      if (parts.size() != 1) issues.push_back(key + ": dirichlet takes no flux in '" + item + "'");
    } else if (parts[0] == "robin" || parts[0] == "neumann") {
      seg.kind = BoundaryKind::neumann_robin;
      if (parts.size() > 2 || (parts.size() == 2 && !parse_number(parts[1], seg.q)))
        issues.push_back(key + ": bad flux in '" + item + "'");
    } else {
      issues.push_back(key + ": unknown boundary kind '" + parts[0] + "'");
      continue;
    }
    out.push_back(seg);
  }
  return out;
}

std::string side_text(const std::vector<BoundarySegment>& segments, Side side) {
  std::vector<std::string> items;
  for (const auto& s : segments) {
    if (s.side != side) continue;
    std::string t = s.kind == BoundaryKind::dirichlet ? "dirichlet" : "robin:" + fmt_double(s.q);
    t += "@" + fmt_double(s.from) + ":" + fmt_double(s.to);
    items.push_back(t);
  }
  return join(items, [](const std::string& s) { return s; });
}

std::map<std::string, std::string> flatten(const boost::property_tree::ptree& tree) {
  std::map<std::string, std::string> out;
  for (const auto& [section, body] : tree) {
    if (body.empty()) {
      if (!trim(body.data()).empty()) out[section] = trim(body.data());
      continue;
    }
    for (const auto& [key, value] : body) out[section + "." + key] = trim(value.data());
  }
  return out;
}

void check(std::vector<std::string>& issues, bool ok, const std::string& message) {
  if (!ok) issues.push_back(message);
}

std::vector<std::string> semantic_issues(const ExperimentConfig& c) {
  std::vector<std::string> issues;
  const auto& p = c.problem;
  check(issues, p.domain.x_max > p.domain.x_min && p.domain.y_max > p.domain.y_min,
        "domain: need x_min < x_max and y_min < y_max");
  check(issues, p.nx >= 1 && p.ny >= 1, "grid.nx, grid.ny: must be positive");
  check(issues, !c.coarse.empty(), "grid.coarse: at least one coarse resolution is required");
  for (int N : c.coarse) {
    if (N < 1) {
      issues.push_back("grid.coarse: " + std::to_string(N) + " is not positive");
      continue;
    }
    if (p.nx % N != 0)
      issues.push_back("grid.coarse: nx = " + std::to_string(p.nx) + " is not divisible by " + std::to_string(N));
    if (p.ny % N != 0)
      issues.push_back("grid.coarse: ny = " + std::to_string(p.ny) + " is not divisible by " + std::to_string(N));
  }
  check(issues, !c.layers.empty(), "cem.layers: at least one entry is required");
  for (int m : c.layers)
    check(issues, m >= 1 || m == kGlobalLayers, "cem.layers: " + std::to_string(m) + " must be >= 1 or -1");
  if (c.pairing == Pairing::zip && !c.layers.empty() && !c.coarse.empty())
    check(issues, c.layers.size() == c.coarse.size() || c.layers.size() == 1,
          "cem.layers: zip pairing needs one entry or as many entries as grid.coarse");
  check(issues, p.lm >= 1, "cem.lm: must be >= 1");
  check(issues, p.C > 0.0, "cem.C: must be positive");
  check(issues, p.contrast >= 1.0, "medium.contrast: must be >= 1");
  check(issues, p.robin.mode != RobinMode::constant || p.robin.value >= 0.0, "boundary.b_value: must be >= 0");
  for (const auto& [key, name] : {std::pair<std::string, std::string>{"boundary.g", p.g},
                                  {"source.f", p.f},
                                  {"time.u_init", p.u_init}}) {
    try {
      builtin_function(name);
    } catch (const InvalidArgument& e) {
      issues.push_back(key + ": " + e.what());
    }
  }
  try {
    builtin_reaction(p.reaction);
  } catch (const InvalidArgument& e) {
    issues.push_back(std::string("nonlinear.reaction: ") + e.what());
  }
  check(issues, c.ode_substeps >= 1, "nonlinear.ode_substeps: must be >= 1");
  check(issues, c.threads >= 1, "run.threads: must be >= 1");
  check(issues, c.time.T > 0.0, "time.T: must be positive");
  check(issues, !c.time.tau.empty(), "time.tau: at least one step size is required");
  for (double tau : c.time.tau) {
    if (!(tau > 0.0)) {
      issues.push_back("time.tau: " + fmt_double(tau) + " is not positive");
      continue;
    }
    const double r = c.time.T / tau;
    check(issues, std::abs(r - std::round(r)) <= 1e-9 * std::max(1.0, r),
          "time.tau: T is not an integer multiple of " + fmt_double(tau));
  }
  check(issues, c.reference.steps >= 1, "reference.steps: must be >= 1");
  check(issues, (c.reference.nx == 0) == (c.reference.ny == 0), "reference.nx, reference.ny: set both or neither");
  check(issues, c.reference.nx >= 0 && c.reference.ny >= 0, "reference.nx, reference.ny: must be >= 0");
  check(issues, !c.output.empty(), "run.output: must not be empty");
  return issues;
}

ExperimentConfig build(const std::map<std::string, std::string>& values, const std::string& text) {
  ExperimentConfig c;
  auto& p = c.problem;
  Reader r(values);

  r.number("run.seed", c.seed);
  r.number("run.threads", c.threads);
  r.text("run.output", c.output);

  r.number("domain.x_min", p.domain.x_min);
  r.number("domain.x_max", p.domain.x_max);
  r.number("domain.y_min", p.domain.y_min);
  r.number("domain.y_max", p.domain.y_max);

  r.number("grid.nx", p.nx);
  p.ny = p.nx;
  r.number("grid.ny", p.ny);
  r.list("grid.coarse", c.coarse);

  r.number("cem.lm", p.lm);
  r.list("cem.layers", c.layers);
  r.number("cem.C", p.C);
  r.boolean("cem.symmetrize", p.symmetrize);
  r.choice("cem.kappa_scale", p.kappa_scale, kappa_scale_from_string);
  r.choice("cem.pairing", c.pairing, [](std::string_view s) {
    if (s == "zip") return Pairing::zip;
    if (s == "product") return Pairing::product;
    throw InvalidArgument("expected zip or product, got '" + std::string(s) + "'");
  });
  r.boolean("cem.corrector_errors", c.corrector_errors);

  r.choice("medium.pattern", p.pattern, medium_pattern_from_string);
  r.number("medium.contrast", p.contrast);
  p.medium_seed = c.seed;
  r.number("medium.seed", p.medium_seed);
  r.text("medium.file", p.medium_file);

  r.choice("velocity.mode", p.velocity, velocity_mode_from_string);
  r.number("velocity.c_flow", p.c_flow);
  r.number("velocity.bx", p.custom_velocity.x());
  r.number("velocity.by", p.custom_velocity.y());

  for (Side side : {Side::left, Side::right, Side::bottom, Side::top}) {
    const std::string key = "boundary." + std::string(to_string(side));
    std::string text_side = "dirichlet";
    r.text(key, text_side);
    for (auto& seg : parse_side(side, text_side, r.issues())) p.segments.push_back(seg);
  }
  r.text("boundary.g", p.g);
  r.choice("boundary.b", p.robin.mode, robin_mode_from_string);
  r.number("boundary.b_value", p.robin.value);

  r.text("source.f", p.f);

  bool has_time = values.count("time.T") || values.count("time.tau") || values.count("time.scheme");
  c.time.enabled = has_time;
  r.number("time.T", c.time.T);
  r.list("time.tau", c.time.tau);
  r.choice("time.scheme", c.time.schemes, [](std::string_view s) -> std::vector<Scheme> {
    if (s == "both") return {Scheme::cd, Scheme::diffusion};
    return {scheme_from_string(s)};
  });
  r.text("time.u_init", p.u_init);

  r.text("nonlinear.reaction", p.reaction);
  r.number("nonlinear.ode_substeps", c.ode_substeps);

  r.number("reference.nx", c.reference.nx);
  r.number("reference.ny", c.reference.ny);
  r.number("reference.steps", c.reference.steps);

  r.reject_unknown();
  auto issues = std::move(r.issues());
  for (auto& i : semantic_issues(c)) issues.push_back(std::move(i));
  if (issues.empty()) {
    // The boundary layout is checked against a tiny grid on the same domain.
    try {
      const FineGrid g(p.domain, 4, 4);
      classify_boundary(g, segments_on_domain(p.domain, p.segments));
    } catch (const InvalidArgument& e) {
      issues.push_back(std::string("boundary: ") + e.what());
    }
  }
  if (!issues.empty()) throw ConfigError(std::move(issues));

  c.source_text = text;
  c.resolved.clear();
  std::istringstream in(dump_config(c));
  boost::property_tree::ptree tree;
  boost::property_tree::ini_parser::read_ini(in, tree);
  c.resolved = flatten(tree);
  return c;
}

}  // namespace

std::vector<std::pair<int, int>> ExperimentConfig::cells() const {
  std::vector<std::pair<int, int>> out;
  if (pairing == Pairing::product) {
    for (int N : coarse)
      for (int m : layers) out.emplace_back(N, m);
  } else {
    for (std::size_t k = 0; k < coarse.size(); ++k)
      out.emplace_back(coarse[k], layers.size() == 1 ? layers[0] : layers[k]);
  }
  return out;
}

ExperimentConfig parse_config_text(const std::string& text) {
  boost::property_tree::ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError({"line " + std::to_string(e.line()) + ": " + e.message()});
  }
  return build(flatten(tree), text);
}

ExperimentConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

void validate_config(const ExperimentConfig& config) {
  auto issues = semantic_issues(config);
  if (!issues.empty()) throw ConfigError(std::move(issues));
}

std::string dump_config(const ExperimentConfig& c) {
  const auto& p = c.problem;
  auto ints = [](const std::vector<int>& v) { return join(v, [](int x) { return std::to_string(x); }); };
  std::ostringstream o;
  o << "[run]\nseed = " << c.seed << "\nthreads = " << c.threads << "\noutput = " << c.output << "\n\n";
  o << "[domain]\nx_min = " << fmt_double(p.domain.x_min) << "\nx_max = " << fmt_double(p.domain.x_max)
    << "\ny_min = " << fmt_double(p.domain.y_min) << "\ny_max = " << fmt_double(p.domain.y_max) << "\n\n";
  o << "[grid]\nnx = " << p.nx << "\nny = " << p.ny << "\ncoarse = " << ints(c.coarse) << "\n\n";
  o << "[cem]\nlm = " << p.lm << "\nlayers = " << ints(c.layers) << "\nC = " << fmt_double(p.C)
    << "\nsymmetrize = " << (p.symmetrize ? "true" : "false") << "\nkappa_scale = " << to_string(p.kappa_scale)
    << "\npairing = " << (c.pairing == Pairing::zip ? "zip" : "product")
    << "\ncorrector_errors = " << (c.corrector_errors ? "true" : "false") << "\n\n";
  o << "[medium]\npattern = " << pattern_name(p.pattern) << "\ncontrast = " << fmt_double(p.contrast)
    << "\nseed = " << p.medium_seed << "\n";
  if (!p.medium_file.empty()) o << "file = " << p.medium_file << "\n";
  o << "\n[velocity]\nmode = " << to_string(p.velocity) << "\nc_flow = " << fmt_double(p.c_flow)
    << "\nbx = " << fmt_double(p.custom_velocity.x()) << "\nby = " << fmt_double(p.custom_velocity.y()) << "\n\n";
  o << "[boundary]\n";
  for (Side side : {Side::left, Side::right, Side::bottom, Side::top})
    o << to_string(side) << " = " << side_text(p.segments, side) << "\n";
  o << "g = " << p.g << "\nb = " << robin_name(p.robin.mode) << "\nb_value = " << fmt_double(p.robin.value)
    << "\n\n";
  o << "[source]\nf = " << p.f << "\n\n";
  if (c.time.enabled) {
    std::string scheme = c.time.schemes.size() == 2 ? "both" : std::string(to_string(c.time.schemes.front()));
    o << "[time]\nT = " << fmt_double(c.time.T) << "\ntau = " << join(c.time.tau, fmt_double)
      << "\nscheme = " << scheme << "\nu_init = " << p.u_init << "\n\n";
  } else if (p.u_init != ProblemSpec{}.u_init) {
    o << "[time]\nu_init = " << p.u_init << "\n\n";
  }
  o << "[nonlinear]\nreaction = " << p.reaction << "\node_substeps = " << c.ode_substeps << "\n\n";
  o << "[reference]\nnx = " << c.reference.nx << "\nny = " << c.reference.ny << "\nsteps = " << c.reference.steps
    << "\n";
  return o.str();
}

}  // namespace cemflow
