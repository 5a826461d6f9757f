#include "horizonlab/value_solver.hpp"

#include "parallel.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

namespace horizonlab {

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

nlohmann::json vec_json(const Vec& v) {
  nlohmann::json j = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v(i));
  return j;
}

Vec json_vec(const nlohmann::json& j) {
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return v;
}

/// Interpolates one time layer of a grid. `oob` (optional) counts queries
/// outside the box.
struct LayerInterpolator {
  const double* values;
  const Vec& lower;
  const Vec& upper;
  const Vec& h;
  const std::vector<int>& counts;
  BoundaryPolicy policy;
  double penalty;

  double operator()(const Vec& x, long* oob) const {
    const int dim = static_cast<int>(lower.size());
    int base[3] = {0, 0, 0};
    double frac[3] = {0.0, 0.0, 0.0};
    std::size_t stride[3] = {1, 1, 1};
    for (int d = 1; d < dim; ++d) stride[d] = stride[d - 1] * static_cast<std::size_t>(counts[d - 1]);
    bool outside = false;
    for (int d = 0; d < dim; ++d) {
      double xd = x(d);
      if (!(xd >= lower(d) && xd <= upper(d))) {
        outside = true;
        xd = std::clamp(std::isnan(xd) ? lower(d) : xd, lower(d), upper(d));
      }
      const int n = counts[d];
      if (n == 1) {
        base[d] = 0;
        frac[d] = 0.0;
        continue;
      }
      const double s = (xd - lower(d)) / h(d);
      int i = static_cast<int>(std::floor(s));
      i = std::clamp(i, 0, n - 2);
      base[d] = i;
      frac[d] = std::clamp(s - i, 0.0, 1.0);
    }
    if (outside) {
      if (oob) ++*oob;
      if (policy == BoundaryPolicy::LargePenalty) return penalty;
    }
    double acc = 0.0;
    const int corners = 1 << dim;
    for (int c = 0; c < corners; ++c) {
      double w = 1.0;
      std::size_t idx = 0;
      for (int d = 0; d < dim; ++d) {
        const bool up = (c >> d) & 1;
        if (counts[d] == 1 && up) {
          w = 0.0;
          break;
        }
        w *= up ? frac[d] : 1.0 - frac[d];
        idx += static_cast<std::size_t>(base[d] + (up ? 1 : 0)) * stride[d];
      }
      if (w != 0.0) acc += w * values[idx];
    }
    return acc;
  }
};

ValueGrid run_backward(const ControlProblem& problem, const GridSpec& spec,
                       const StateField& terminal, const std::string& tag) {
  spec.validate();
  if (spec.dim() != problem.state_dim()) {
    throw ArgumentError("grid dimension does not match the problem's state dimension");
  }
  const auto counts = spec.node_counts();
  const Vec h = spec.effective_spacing();
  std::size_t nodes = 1;
  for (int c : counts) nodes *= static_cast<std::size_t>(c);
  const int steps = spec.time_steps();
  const double dt = spec.effective_dt();
  std::vector<double> values(static_cast<std::size_t>(steps + 1) * nodes, 0.0);

  auto position = [&](std::size_t node) {
    Vec x(spec.dim());
    std::size_t rem = node;
    for (int d = 0; d < spec.dim(); ++d) {
      const auto n = static_cast<std::size_t>(counts[d]);
      const auto i = static_cast<int>(rem % n);
      rem /= n;
      x(d) = (i == counts[d] - 1) ? spec.upper(d) : spec.lower(d) + h(d) * i;
    }
    return x;
  };

  // Problem dynamics must stay bounded on the box; probe the corners and centre.
  {
    const Vec centre = 0.5 * (spec.lower + spec.upper);
    for (const auto& u : problem.control_samples()) {
      if (!problem.dynamics(0.0, centre, u).allFinite() ||
          !std::isfinite(problem.running_cost(0.0, centre, u))) {
        throw SolverError("dynamics or cost not finite at the grid centre");
      }
    }
  }

  double* last = values.data() + static_cast<std::size_t>(steps) * nodes;
  if (terminal) {
    for (std::size_t j = 0; j < nodes; ++j) last[j] = terminal(position(j));
  }
  for (std::size_t j = 0; j < nodes; ++j) {
    if (!std::isfinite(last[j])) {
      std::ostringstream os;
      os << "terminal payoff not finite at node " << j << " (x=" << position(j).transpose() << ")";
      throw SolverError(os.str());
    }
  }

  const auto& controls = problem.control_samples();
  const bool heun = spec.scheme == TimeScheme::Heun;
  const int workers = configured_threads();
  std::atomic<long> oob_total{0};
  for (int i = steps - 1; i >= 0; --i) {
    const double t = i == 0 ? 0.0 : dt * i;
    const double* next = values.data() + static_cast<std::size_t>(i + 1) * nodes;
    double* cur = values.data() + static_cast<std::size_t>(i) * nodes;
    LayerInterpolator interp{next, spec.lower, spec.upper, h, counts, spec.boundary, spec.penalty};
    detail::parallel_chunks(nodes, workers, [&](std::size_t begin, std::size_t end) {
      long oob = 0;
      for (std::size_t j = begin; j < end; ++j) {
        const Vec x = position(j);
        double best = std::numeric_limits<double>::infinity();
        for (const auto& u : controls) {
          const Vec k1 = problem.dynamics(t, x, u);
          double c;
          if (heun) {
            const Vec p = x + dt * k1;
            const Vec y = x + 0.5 * dt * (k1 + problem.dynamics(t + dt, p, u));
            c = 0.5 * dt * (problem.running_cost(t, x, u) + problem.running_cost(t + dt, y, u)) +
                interp(y, &oob);
          } else {
            c = dt * problem.running_cost(t, x, u) + interp(x + dt * k1, &oob);
          }
          if (c < best) best = c;
        }
        cur[j] = best;
      }
      oob_total += oob;
    });
    for (std::size_t j = 0; j < nodes; ++j) {
      if (!std::isfinite(cur[j])) {
        std::ostringstream os;
        os << "value table not finite at layer " << i << " (t=" << t << "), node " << j
           << " (x=" << position(j).transpose() << ")";
        throw SolverError(os.str());
      }
    }
  }
  return ValueGrid(spec, std::move(values), tag, oob_total.load());
}

}  // namespace

// ---------------------------------------------------------------------------
// GridSpec

std::string to_string(BoundaryPolicy policy) {
  return policy == BoundaryPolicy::ClampExtrapolate ? "clamp-extrapolate" : "large-penalty";
}

BoundaryPolicy boundary_policy_from_string(const std::string& tag) {
  if (tag == "clamp-extrapolate") return BoundaryPolicy::ClampExtrapolate;
  if (tag == "large-penalty") return BoundaryPolicy::LargePenalty;
  throw ArgumentError("unknown boundary policy '" + tag + "'");
}

std::string to_string(TimeScheme scheme) {
  return scheme == TimeScheme::Euler ? "euler" : "heun";
}

TimeScheme time_scheme_from_string(const std::string& tag) {
  if (tag == "euler") return TimeScheme::Euler;
  if (tag == "heun") return TimeScheme::Heun;
  throw ArgumentError("unknown time scheme '" + tag + "'");
}

GridSpec GridSpec::uniform(const Vec& lower, const Vec& upper, double h, double dt,
                           double horizon) {
  GridSpec s;
  s.lower = lower;
  s.upper = upper;
  s.spacing = Vec::Constant(lower.size(), h);
  s.dt = dt;
  s.horizon = horizon;
  return s;
}

void GridSpec::validate() const {
  if (lower.size() == 0 || lower.size() > 3 || lower.size() != upper.size() ||
      spacing.size() != lower.size()) {
    throw ArgumentError("grid bounds and spacing must share a dimension in [1, 3]");
  }
  for (int d = 0; d < dim(); ++d) {
    if (!(lower(d) < upper(d))) throw ArgumentError("grid requires lower < upper componentwise");
    if (!(spacing(d) > 0.0)) throw ArgumentError("grid spacing must be positive");
  }
  if (!(dt > 0.0)) throw ArgumentError("grid time step must be positive");
  if (!(horizon > 0.0)) throw ArgumentError("grid horizon must be positive");
}

std::vector<int> GridSpec::node_counts() const {
  std::vector<int> counts;
  for (int d = 0; d < dim(); ++d) {
    const double cells = std::ceil((upper(d) - lower(d)) / spacing(d) - 1e-9);
    counts.push_back(static_cast<int>(std::max(1.0, cells)) + 1);
  }
  return counts;
}

Vec GridSpec::effective_spacing() const {
  const auto counts = node_counts();
  Vec h(dim());
  for (int d = 0; d < dim(); ++d) h(d) = (upper(d) - lower(d)) / (counts[d] - 1);
  return h;
}

int GridSpec::time_steps() const {
  return static_cast<int>(std::max(1.0, std::ceil(horizon / dt - 1e-9)));
}

GridSpec GridSpec::with_horizon(double T) const {
  GridSpec s = *this;
  s.horizon = T;
  return s;
}

GridSpec GridSpec::refined() const {
  GridSpec s = *this;
  s.spacing = spacing / 2.0;
  s.dt = dt / 2.0;
  return s;
}

std::string GridSpec::key() const {
  std::ostringstream os;
  for (int d = 0; d < dim(); ++d) {
    os << fmt17(lower(d)) << ':' << fmt17(upper(d)) << ':' << fmt17(spacing(d)) << ';';
  }
  os << fmt17(dt) << ';' << fmt17(horizon) << ';' << to_string(boundary) << ';' << fmt17(penalty) << ';'
     << to_string(scheme);
  return os.str();
}

nlohmann::json GridSpec::to_json() const {
  return {{"lower", vec_json(lower)},   {"upper", vec_json(upper)},
          {"spacing", vec_json(spacing)}, {"dt", dt},
          {"horizon", horizon},         {"boundary", to_string(boundary)},
          {"penalty", penalty},         {"scheme", to_string(scheme)}};
}

GridSpec GridSpec::from_json(const nlohmann::json& j) {
  GridSpec s;
  s.lower = json_vec(j.at("lower"));
  s.upper = json_vec(j.at("upper"));
  s.spacing = json_vec(j.at("spacing"));
  s.dt = j.at("dt").get<double>();
  s.horizon = j.at("horizon").get<double>();
  s.boundary = boundary_policy_from_string(j.value("boundary", "clamp-extrapolate"));
  s.penalty = j.value("penalty", 1e6);
  s.scheme = time_scheme_from_string(j.value("scheme", "euler"));
  s.validate();
  return s;
}

// ---------------------------------------------------------------------------
// ValueGrid

ValueGrid::ValueGrid(GridSpec spec, std::vector<double> values, std::string terminal_tag,
                     long out_of_box_queries)
    : spec_(std::move(spec)),
      values_(std::move(values)),
      terminal_tag_(std::move(terminal_tag)),
      out_of_box_(out_of_box_queries) {
  spec_.validate();
  counts_ = spec_.node_counts();
  h_ = spec_.effective_spacing();
  nodes_ = 1;
  for (int c : counts_) nodes_ *= static_cast<std::size_t>(c);
  const int steps = spec_.time_steps();
  const double dt = spec_.effective_dt();
  for (int i = 0; i <= steps; ++i) times_.push_back(i == steps ? spec_.horizon : dt * i);
  if (values_.size() != nodes_ * times_.size()) {
    throw ArgumentError("value table size does not match the grid");
  }
  for (std::size_t k = 0; k < values_.size(); ++k) {
    if (!std::isfinite(values_[k])) {
      throw SolverError("value table entry " + std::to_string(k) + " is not finite");
    }
  }
}

Vec ValueGrid::node_position(std::size_t node) const {
  Vec x(spec_.dim());
  std::size_t rem = node;
  for (int d = 0; d < spec_.dim(); ++d) {
    const auto n = static_cast<std::size_t>(counts_[d]);
    const auto i = static_cast<int>(rem % n);
    rem /= n;
    x(d) = (i == counts_[d] - 1) ? spec_.upper(d) : spec_.lower(d) + h_(d) * i;
  }
  return x;
}

std::size_t ValueGrid::node_index(const std::vector<int>& multi) const {
  std::size_t idx = 0;
  std::size_t stride = 1;
  for (int d = 0; d < spec_.dim(); ++d) {
    idx += static_cast<std::size_t>(multi[d]) * stride;
    stride *= static_cast<std::size_t>(counts_[d]);
  }
  return idx;
}

double ValueGrid::evaluate_layer(int layer, const Vec& x) const {
  LayerInterpolator interp{values_.data() + static_cast<std::size_t>(layer) * nodes_,
                           spec_.lower,
                           spec_.upper,
                           h_,
                           counts_,
                           spec_.boundary,
                           spec_.penalty};
  return interp(x, nullptr);
}

double ValueGrid::evaluate(double t, const Vec& x) const {
  const int last = num_layers() - 1;
  if (t <= 0.0) return evaluate_layer(0, x);
  if (t >= spec_.horizon) return evaluate_layer(last, x);
  const double dt = spec_.effective_dt();
  int i = std::clamp(static_cast<int>(std::floor(t / dt)), 0, last - 1);
  const double w = std::clamp((t - times_[i]) / (times_[i + 1] - times_[i]), 0.0, 1.0);
  if (w == 0.0) return evaluate_layer(i, x);
  if (w == 1.0) return evaluate_layer(i + 1, x);
  return (1.0 - w) * evaluate_layer(i, x) + w * evaluate_layer(i + 1, x);
}

ValueGrid solve_finite_horizon(const ControlProblem& problem, const GridSpec& spec) {
  return run_backward(problem, spec, nullptr, "zero");
}

ValueGrid bolza_extend(const ControlProblem& problem, const GridSpec& spec,
                       const StateField& terminal, const std::string& terminal_tag) {
  if (!terminal) throw ArgumentError("bolza_extend needs a terminal payoff");
  return run_backward(problem, spec, terminal, terminal_tag);
}

double evaluate(const ValueGrid& grid, double t, const Vec& x) { return grid.evaluate(t, x); }

TimeStateField as_field(std::shared_ptr<const ValueGrid> grid) {
  return [grid = std::move(grid)](double t, const Vec& x) { return grid->evaluate(t, x); };
}

// ---------------------------------------------------------------------------
// DPP residual

double dpp_residual(const TimeStateField& value, const ControlProblem& problem, double t,
                    double tau, const Vec& b, const DppOptions& options) {
  if (!(t >= 0.0) || !(tau > t)) throw ArgumentError("dpp_residual requires 0 <= t < tau");
  const auto& samples = problem.control_samples();
  const double mid = 0.5 * (t + tau);
  double best = std::numeric_limits<double>::infinity();
  auto consider = [&](const ControlSignal& u) {
    const Trajectory traj = integrate_trajectory(problem, b, t, u, tau, options.integration_step);
    const double j = accumulate_cost(problem, traj, t, tau);
    best = std::min(best, j + value(tau, traj.final_state()));
  };
  for (const auto& v : samples) consider(ControlSignal::constant(v));
  for (const auto& v1 : samples) {
    for (const auto& v2 : samples) {
      if (v1 == v2) continue;
      consider(ControlSignal({0.0, mid}, {v1, v2}));
    }
  }
  return value(t, b) - best;
}

double dpp_residual(const ValueGrid& grid, const ControlProblem& problem, double t, double tau,
                    const Vec& b, const DppOptions& options) {
  if (tau > grid.spec().horizon + 1e-12) throw ArgumentError("dpp_residual requires tau <= T");
  return dpp_residual([&grid](double s, const Vec& x) { return grid.evaluate(s, x); }, problem,
                      t, tau, b, options);
}

// ---------------------------------------------------------------------------
// Cache

std::shared_ptr<const ValueGrid> ValueGridCache::get(const ControlProblem& problem,
                                                     const GridSpec& spec) {
  const std::string key = problem.cache_key() + "#" + spec.key();
  {
    std::lock_guard lock(mutex_);
    if (auto it = grids_.find(key); it != grids_.end()) return it->second;
  }
  auto grid = std::make_shared<const ValueGrid>(solve_finite_horizon(problem, spec));
  std::lock_guard lock(mutex_);
  return grids_.emplace(key, std::move(grid)).first->second;
}

std::size_t ValueGridCache::size() const {
  std::lock_guard lock(mutex_);
  return grids_.size();
}

// ---------------------------------------------------------------------------
// Export / import

void write_value_csv(const ValueGrid& grid, const std::string& csv_path) {
  std::ofstream out(csv_path);
  if (!out) throw ArgumentError("cannot write " + csv_path);
  out << "t";
  for (int d = 0; d < grid.spec().dim(); ++d) out << ",x" << d;
  out << ",V\n";
  for (int i = 0; i < grid.num_layers(); ++i) {
    const std::string t = fmt17(grid.times()[i]);
    for (std::size_t j = 0; j < grid.nodes_per_layer(); ++j) {
      out << t;
      const Vec x = grid.node_position(j);
      for (Eigen::Index d = 0; d < x.size(); ++d) out << ',' << fmt17(x(d));
      out << ',' << fmt17(grid.node_value(i, j)) << '\n';
    }
  }
}

void write_value_sidecar(const ValueGrid& grid, const std::string& json_path) {
  std::ofstream out(json_path);
  if (!out) throw ArgumentError("cannot write " + json_path);
  nlohmann::json j = {{"grid", grid.spec().to_json()},
                      {"terminal", grid.terminal_tag()},
                      {"layers", grid.num_layers()},
                      {"nodes_per_layer", grid.nodes_per_layer()},
                      {"out_of_box_queries", grid.out_of_box_queries()}};
  out << j.dump(2) << '\n';
}

namespace {

nlohmann::json read_sidecar(const std::string& json_path) {
  std::ifstream in(json_path);
  if (!in) throw ArgumentError("cannot read " + json_path);
  return nlohmann::json::parse(in);
}

}  // namespace

ValueGrid read_value_csv(const std::string& csv_path, const std::string& json_path) {
  const auto side = read_sidecar(json_path);
  const GridSpec spec = GridSpec::from_json(side.at("grid"));
  std::ifstream in(csv_path);
  if (!in) throw ArgumentError("cannot read " + csv_path);
  std::string line;
  std::getline(in, line);  // header
  std::vector<double> values;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto pos = line.rfind(',');
    if (pos == std::string::npos) throw ArgumentError("malformed value CSV row");
    values.push_back(std::strtod(line.c_str() + pos + 1, nullptr));
  }
  return ValueGrid(spec, std::move(values), side.value("terminal", "zero"),
                   side.value("out_of_box_queries", 0L));
}

void write_value_binary(const ValueGrid& grid, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArgumentError("cannot write " + path);
  const char magic[4] = {'H', 'L', 'V', 'G'};
  const std::uint64_t count = grid.raw_values().size();
  out.write(magic, 4);
  out.write(reinterpret_cast<const char*>(&count), sizeof count);
  out.write(reinterpret_cast<const char*>(grid.raw_values().data()),
            static_cast<std::streamsize>(count * sizeof(double)));
}

ValueGrid read_value_binary(const std::string& path, const std::string& json_path) {
  const auto side = read_sidecar(json_path);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot read " + path);
  char magic[4];
  std::uint64_t count = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&count), sizeof count);
  if (!in || std::string(magic, 4) != "HLVG") throw ArgumentError("not a value grid file: " + path);
  std::vector<double> values(count);
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(count * sizeof(double)));
  if (!in) throw ArgumentError("truncated value grid file: " + path);
  return ValueGrid(GridSpec::from_json(side.at("grid")), std::move(values),
                   side.value("terminal", "zero"), side.value("out_of_box_queries", 0L));
}

int configured_threads() {
  if (const char* env = std::getenv("HORIZONLAB_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return 1;
}

}  // namespace horizonlab
