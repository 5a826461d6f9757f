#include "horizonlab/regularity.hpp"

#include "parallel.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <unordered_map>

namespace horizonlab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

nlohmann::json vec_json(const Vec& v) {
  nlohmann::json j = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v(i));
  return j;
}

Vec pick(const Vec& c, const std::vector<int>& idx) {
  Vec out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out(static_cast<Eigen::Index>(i)) = c(idx[i]);
  return out;
}

std::vector<int> complement(int m, const std::vector<int>& idx) {
  std::vector<int> out;
  for (int i = 0; i < m; ++i) {
    if (std::find(idx.begin(), idx.end(), i) == idx.end()) out.push_back(i);
  }
  return out;
}

double number_param(const nlohmann::json& params, const char* key, double fallback) {
  return params.contains(key) ? params.at(key).get<double>() : fallback;
}

using CellKey = std::array<long long, kMaxDim>;

struct CellKeyHash {
  std::size_t operator()(const CellKey& k) const noexcept {
    std::size_t h = 1469598103934665603ULL;
    for (long long v : k) {
      h ^= static_cast<std::size_t>(v);
      h *= 1099511628211ULL;
    }
    return h;
  }
};

}  // namespace

bool StateBox::contains(const Vec& x, double tol) const {
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (x(i) < lo(i) - tol || x(i) > hi(i) + tol) return false;
  }
  return true;
}

nlohmann::json StateBox::to_json() const { return {{"lo", vec_json(lo)}, {"hi", vec_json(hi)}}; }

// ---------------------------------------------------------------------------
// Product structures and charts

std::optional<Vec> ProductStructure::to_chart(const Vec& x) const {
  if (!chart) return x;
  return chart(x);
}

Vec ProductStructure::w_of(const Vec& c) const { return pick(c, w_indices); }
Vec ProductStructure::z_of(const Vec& c) const { return pick(c, z_indices); }

bool ProductStructure::in_region(double t, const Vec& c) const {
  if (t < t_lo - 1e-12 || t > t_hi + 1e-12) return false;
  if (W && !w_indices.empty() && !W->contains(w_of(c), 1e-12)) return false;
  if (Z && !Z->contains(z_of(c), 1e-12)) return false;
  return true;
}

const ControlProblem& ProductStructure::search_problem(const ControlProblem& original) const {
  return chart_problem ? *chart_problem : original;
}

ProductStructure capital_stock_structure(const ControlProblem& problem, StateField S) {
  const double mu = number_param(problem.params(), "mu", -1.0);
  ProductStructure ps;
  ps.name = "capital-stock";
  ps.z_indices = {0};
  ps.R = [mu](double t, const Vec&) { return std::exp(mu * t); };
  ps.S = std::move(S);
  return ps;
}

ProductStructure double_integrator_structure(DoubleIntegratorChart chart, double a, double k, StateField S) {
  if (!(a > 0.0)) throw ArgumentError("chart needs a > 0");
  ProductStructure ps;
  ps.w_indices = {0};
  ps.z_indices = {1};
  ps.S = std::move(S);
  const double expo = k + 1.0;
  ps.R = [expo](double, const Vec& w) { return std::pow(std::abs(w(0)), expo); };
  ProblemDefinition def;
  def.state_dim = 2;
  def.running_cost = [](double, const Vec&, const Vec&) { return 0.0; };
  def.control_box = {scalar_vec(-a * a), scalar_vec(a * a), 21};
  def.initial_state = make_vec({1.0, 0.0});
  ps.restricted_controls = {scalar_vec(-a * a), scalar_vec(a * a)};
  if (chart == DoubleIntegratorChart::Sqrt) {
    ps.name = "sqrt-chart";
    ps.chart = [](const Vec& y) -> std::optional<Vec> {
      if (!(y(1) > 0.0)) return std::nullopt;
      const double w = std::sqrt(y(1));
      return make_vec({w, y(0) / w});
    };
    def.name = "double-integrator/sqrt-chart";
    def.dynamics = [](double, const Vec& c, const Vec& u) {
      return make_vec({c(1) / 2.0, (u(0) - c(1) * c(1) / 2.0) / c(0)});
    };
    ps.W = StateBox{scalar_vec(1e-9), scalar_vec(kInf)};
    def.growth = {4.0, 2.0 + a * a};
  } else {
    ps.name = "ratio-chart";
    ps.chart = [](const Vec& y) -> std::optional<Vec> {
      if (y(0) == 0.0) return std::nullopt;
      return make_vec({y(0), y(1) / (y(0) * y(0))});
    };
    def.name = "double-integrator/ratio-chart";
    def.dynamics = [](double, const Vec& c, const Vec& u) {
      return make_vec({u(0), (1.0 - 2.0 * c(1) * u(0)) / c(0)});
    };
    ps.W = StateBox{scalar_vec(1e-9), scalar_vec(kInf)};
    def.growth = {4.0, 2.0 + 8.0 * a * a + a * a};
  }
  // the chart dynamics are singular at w = 0, so validate away from it
  def.validation_lo = make_vec({0.5, -2.0});
  def.validation_hi = make_vec({2.0, 2.0});
  ps.chart_problem = ControlProblem(std::move(def));
  return ps;
}

ControlProblem unit_speed_problem(int dim, int samples) {
  if (dim < 1 || dim > kMaxDim) throw ArgumentError("unit-speed dimension out of range");
  ProblemDefinition def;
  def.name = "unit-speed";
  def.state_dim = dim;
  def.dynamics = [](double, const Vec&, const Vec& u) { return u; };
  def.running_cost = [](double, const Vec&, const Vec&) { return 0.0; };
  def.control_box = {Vec::Constant(dim, -1.0), Vec::Constant(dim, 1.0), samples};
  def.initial_state = Vec::Zero(dim);
  def.growth = {0.0, std::sqrt(static_cast<double>(dim))};
  def.state_jacobian = [dim](double, const Vec&, const Vec&) { return Mat(Mat::Zero(dim, dim)); };
  def.cost_gradient = [dim](double, const Vec&, const Vec&) { return Vec(Vec::Zero(dim)); };
  return ControlProblem(std::move(def));
}

// ---------------------------------------------------------------------------
// Time-expanded lattice search

std::string to_string(TimeVariant variant) {
  switch (variant) {
    case TimeVariant::MinRestricted: return "min-restricted";
    case TimeVariant::Min: return "min";
    case TimeVariant::Max: return "max";
  }
  return "unknown";
}

nlohmann::json TimeQueryRecord::to_json() const {
  return {{"t", t_start},
          {"y", vec_json(y_start)},
          {"z_target", vec_json(z_target)},
          {"time", reached ? nlohmann::json(time) : nlohmann::json("inf")},
          {"reached", reached},
          {"labels", labels}};
}

nlohmann::json TimeFunctionEstimate::to_json() const {
  nlohmann::json q = nlohmann::json::array();
  for (const auto& r : queries) q.push_back(r.to_json());
  nlohmann::json cs = nlohmann::json::array();
  for (const auto& c : controls) cs.push_back(vec_json(c));
  return {{"variant", to_string(variant)}, {"dt", dt}, {"h", h}, {"cap", cap}, {"controls", cs}, {"queries", q}};
}

namespace {

struct SearchSetup {
  std::vector<int> z_idx;
  std::vector<int> w_idx;
  std::vector<Vec> controls;
  StateBox box;
  int steps = 0;
};

SearchSetup prepare_search(const ControlProblem& problem, const Vec& y, const Vec& z_target,
                           const TimeSearchOptions& o) {
  if (!(o.cap > 0.0)) throw ArgumentError("horizon cap must be positive");
  if (!(o.dt > 0.0) || !(o.h > 0.0)) throw ArgumentError("lattice steps must be positive");
  const int m = problem.state_dim();
  if (y.size() != m) throw ArgumentError("start state has the wrong dimension");
  SearchSetup s;
  if (o.z_indices.empty()) {
    for (int i = 0; i < m; ++i) s.z_idx.push_back(i);
  } else {
    s.z_idx = o.z_indices;
  }
  for (int i : s.z_idx) {
    if (i < 0 || i >= m) throw ArgumentError("z index out of range");
  }
  if (z_target.size() != static_cast<Eigen::Index>(s.z_idx.size())) {
    throw ArgumentError("z target has the wrong dimension");
  }
  s.w_idx = complement(m, s.z_idx);
  s.controls = o.controls.empty() ? problem.control_samples() : o.controls;
  if (s.controls.empty()) throw ArgumentError("control subset is empty");
  if (o.search_box) {
    s.box = *o.search_box;
  } else {
    const auto& g = problem.growth();
    const double r = (y.lpNorm<Eigen::Infinity>() + g.c2 * o.cap) * std::exp(g.c1 * o.cap) + o.h;
    s.box = {Vec::Constant(m, -r), Vec::Constant(m, r)};
  }
  s.steps = static_cast<int>(std::ceil(o.cap / o.dt - 1e-9));
  return s;
}

/// Parameter s in [0, 1] where the segment x0 -> x1 is in the target, closest
/// to the target z; nullopt when it never is.
std::optional<double> segment_hit(const Vec& x0, const Vec& x1, const Vec& z_target, const SearchSetup& s,
                                  const TimeSearchOptions& o) {
  double lo = 0.0, hi = 1.0;
  const double half = o.h / 2.0;
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < s.z_idx.size(); ++i) {
    const int c = s.z_idx[i];
    const double a = x0(c), d = x1(c) - x0(c);
    const double tg = z_target(static_cast<Eigen::Index>(i));
    num += (tg - a) * d;
    den += d * d;
    if (d == 0.0) {
      if (std::abs(a - tg) > half) return std::nullopt;
      continue;
    }
    double s1 = (tg - half - a) / d, s2 = (tg + half - a) / d;
    if (s1 > s2) std::swap(s1, s2);
    lo = std::max(lo, s1);
    hi = std::min(hi, s2);
    if (lo > hi) return std::nullopt;
  }
  const double closest = den > 0.0 ? std::clamp(num / den, lo, hi) : lo;
  if (o.W_set && !s.w_idx.empty()) {
    const Vec x = x0 + closest * (x1 - x0);
    if (!o.W_set->contains(pick(x, s.w_idx), 1e-12)) return std::nullopt;
  }
  return closest;
}

bool start_in_target(const Vec& y, const Vec& z_target, const SearchSetup& s, const TimeSearchOptions& o) {
  for (std::size_t i = 0; i < s.z_idx.size(); ++i) {
    if (std::abs(y(s.z_idx[i]) - z_target(static_cast<Eigen::Index>(i))) > o.h / 2.0) return false;
  }
  return !(o.W_set && !s.w_idx.empty() && !o.W_set->contains(pick(y, s.w_idx), 1e-12));
}

TimeQueryRecord lattice_search(const ControlProblem& problem, double t_start, const Vec& y, const Vec& z_target,
                               const TimeSearchOptions& o, bool latest) {
  const auto s = prepare_search(problem, y, z_target, o);
  TimeQueryRecord rec;
  rec.t_start = t_start;
  rec.y_start = y;
  rec.z_target = z_target;
  if (start_in_target(y, z_target, s, o)) {
    rec.time = 0.0;
    rec.reached = true;
    return rec;
  }
  const int m = problem.state_dim();
  std::vector<Vec> layer{y};
  double best = kInf, worst = 0.0;
  bool any = false;
  for (int k = 0; k < s.steps; ++k) {
    const double t = t_start + k * o.dt;
    std::vector<Vec> next;
    std::vector<double> score;
    std::unordered_map<CellKey, std::size_t, CellKeyHash> seen;
    for (const auto& x : layer) {
      ++rec.labels;
      for (const auto& u : s.controls) {
        const Vec x1 = x + o.dt * problem.dynamics(t, x, u);
        if (const auto hit = segment_hit(x, x1, z_target, s, o)) {
          const double arrival = k * o.dt + *hit * o.dt;
          any = true;
          best = std::min(best, arrival);
          worst = std::max(worst, arrival);
          continue;
        }
        bool outside = false;
        for (int i = 0; i < m && !outside; ++i) {
          if (!std::isfinite(x1(i)) || x1(i) < s.box.lo(i) || x1(i) > s.box.hi(i)) {
            outside = true;
            if (o.prune_outside) break;
            char buf[160];
            std::snprintf(buf, sizeof buf, "lattice overflow: coordinate %d left the search box at t=%.6g", i,
                          t + o.dt);
            throw LatticeOverflowError(buf, i);
          }
        }
        if (outside) continue;
        CellKey key{};
        for (int i = 0; i < m; ++i) key[static_cast<std::size_t>(i)] = std::llround(std::floor(x1(i) / o.h));
        // per cell keep the label with the most progress toward (min) or
        // least progress toward (max) the target
        const double d = (pick(x1, s.z_idx) - z_target).norm();
        const auto [it, fresh] = seen.emplace(key, next.size());
        if (fresh) {
          next.push_back(x1);
          score.push_back(d);
        } else if (latest ? d > score[it->second] : d < score[it->second]) {
          next[it->second] = x1;
          score[it->second] = d;
        }
      }
    }
    if (!latest && any) {
      rec.time = best;
      rec.reached = true;
      return rec;
    }
    layer = std::move(next);
    if (!latest && layer.empty()) break;
    if (latest && layer.empty()) {
      rec.time = worst;
      rec.reached = any;
      return rec;
    }
  }
  rec.time = kInf;
  rec.reached = false;
  return rec;
}

}  // namespace

TimeQueryRecord min_time_estimate(const ControlProblem& problem, double t_start, const Vec& y_start,
                                  const Vec& z_target, const TimeSearchOptions& options) {
  return lattice_search(problem, t_start, y_start, z_target, options, false);
}

TimeQueryRecord max_time_estimate(const ControlProblem& problem, double t_start, const Vec& y_start,
                                  const Vec& z_target, const TimeSearchOptions& options) {
  return lattice_search(problem, t_start, y_start, z_target, options, true);
}

TimeFunctionEstimate estimate_time_function(const ControlProblem& problem, TimeVariant variant,
                                            const std::vector<TimeQuery>& queries,
                                            const TimeSearchOptions& options) {
  TimeFunctionEstimate est;
  est.variant = variant;
  est.dt = options.dt;
  est.h = options.h;
  est.cap = options.cap;
  est.controls = options.controls.empty() ? problem.control_samples() : options.controls;
  est.queries.resize(queries.size());
  const bool latest = variant == TimeVariant::Max;
  detail::parallel_chunks(queries.size(), configured_threads(), [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      est.queries[i] = lattice_search(problem, queries[i].t, queries[i].y, queries[i].z, options, latest);
    }
  });
  return est;
}

// ---------------------------------------------------------------------------
// Convex hull tests

std::vector<Vec> sphere_cover(int dim, int count) {
  std::vector<Vec> dirs;
  if (dim == 1) return {scalar_vec(1.0), scalar_vec(-1.0)};
  if (dim == 2) {
    for (int k = 0; k < count; ++k) {
      const double a = 2.0 * std::numbers::pi * k / count;
      dirs.push_back(make_vec({std::cos(a), std::sin(a)}));
    }
    return dirs;
  }
  if (dim == 3) {
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (int k = 0; k < count; ++k) {
      const double y = 1.0 - 2.0 * (k + 0.5) / count;
      const double r = std::sqrt(1.0 - y * y);
      dirs.push_back(make_vec({r * std::cos(golden * k), y, r * std::sin(golden * k)}));
    }
    return dirs;
  }
  if (dim < 1 || dim > kMaxDim) throw ArgumentError("sphere cover dimension out of range");
  for (int i = 0; i < dim; ++i) {
    Vec e = Vec::Zero(dim);
    e(i) = 1.0;
    dirs.push_back(e);
    dirs.push_back(-e);
  }
  std::mt19937_64 rng(64);
  std::normal_distribution<double> normal;
  while (static_cast<int>(dirs.size()) < count) {
    Vec v(dim);
    for (int i = 0; i < dim; ++i) v(i) = normal(rng);
    if (v.norm() > 1e-9) dirs.push_back(v / v.norm());
  }
  return dirs;
}

HullTest interior_convexhull_test(const std::vector<Vec>& velocities) {
  if (velocities.empty()) throw ArgumentError("velocity set is empty");
  HullTest out;
  out.margin = kInf;
  for (const auto& d : sphere_cover(static_cast<int>(velocities.front().size()))) {
    double best = -kInf;
    for (const auto& v : velocities) best = std::max(best, d.dot(v));
    out.margin = std::min(out.margin, best);
  }
  out.inside = out.margin > 1e-12;
  return out;
}

HullTest interior_convexhull_test(const ControlProblem& problem, double t, const Vec& x) {
  return interior_convexhull_test(problem, t, x, problem.control_samples());
}

HullTest interior_convexhull_test(const ControlProblem& problem, double t, const Vec& x,
                                  const std::vector<Vec>& controls) {
  if (controls.empty()) throw ArgumentError("control subset is empty");
  std::vector<Vec> vel;
  for (const auto& u : controls) vel.push_back(problem.dynamics(t, x, u));
  return interior_convexhull_test(vel);
}

SeparationTest separation_test(const std::vector<Vec>& velocities) {
  if (velocities.empty()) throw ArgumentError("velocity set is empty");
  SeparationTest out;
  out.margin = -kInf;
  for (const auto& d : sphere_cover(static_cast<int>(velocities.front().size()))) {
    double worst = -kInf;
    for (const auto& v : velocities) worst = std::max(worst, d.dot(v));
    if (-worst > out.margin) {
      out.margin = -worst;
      out.direction = d;
    }
  }
  out.separated = out.margin > 1e-12;
  return out;
}

SeparationTest separation_test(const ControlProblem& problem, const std::vector<std::pair<double, Vec>>& samples) {
  if (samples.empty()) throw ArgumentError("separation test needs samples");
  std::vector<Vec> vel;
  for (const auto& [t, x] : samples) {
    for (const auto& u : problem.control_samples()) vel.push_back(problem.dynamics(t, x, u));
  }
  return separation_test(vel);
}

// ---------------------------------------------------------------------------
// Product structure validation

nlohmann::json ProductValidation::to_json() const {
  return {{"max_rel_error", max_rel_error},
          {"pass", pass},
          {"worst_t", worst_t},
          {"worst_x", vec_json(worst_x)},
          {"points", points}};
}

std::vector<std::pair<double, Vec>> validation_lattice(const std::vector<double>& times, const StateBox& box,
                                                       int per_dim) {
  if (per_dim < 1) throw ArgumentError("lattice needs at least one point per dimension");
  const int m = static_cast<int>(box.lo.size());
  int total = 1;
  for (int d = 0; d < m; ++d) total *= per_dim;
  std::vector<std::pair<double, Vec>> out;
  for (double t : times) {
    for (int k = 0; k < total; ++k) {
      Vec x(m);
      int rem = k;
      for (int d = 0; d < m; ++d) {
        const int i = rem % per_dim;
        rem /= per_dim;
        x(d) = per_dim == 1 ? 0.5 * (box.lo(d) + box.hi(d))
                            : box.lo(d) + (box.hi(d) - box.lo(d)) * i / (per_dim - 1);
      }
      out.emplace_back(t, x);
    }
  }
  return out;
}

ProductValidation validate_product_structure(const TimeStateField& V, const ProductStructure& ps,
                                             const std::vector<std::pair<double, Vec>>& lattice, double tol) {
  if (!ps.R || !ps.S) throw ArgumentError("product structure needs both R and S");
  ProductValidation out;
  for (const auto& [t, x] : lattice) {
    const auto c = ps.to_chart(x);
    if (!c) continue;
    if (!ps.in_region(t, *c)) throw ArgumentError("validation point outside the declared region");
    const double v = V(t, x);
    const double err = std::abs(v - ps.R(t, ps.w_of(*c)) * ps.S(ps.z_of(*c))) / std::max(1.0, std::abs(v));
    ++out.points;
    if (!(err <= out.max_rel_error)) {
      out.max_rel_error = std::isfinite(err) ? err : kInf;
      out.worst_t = t;
      out.worst_x = x;
    }
  }
  out.pass = out.points > 0 && out.max_rel_error <= tol;
  return out;
}

// ---------------------------------------------------------------------------
// Region classification

std::string to_string(HypothesisRoute route) {
  switch (route) {
    case HypothesisRoute::None: return "none";
    case HypothesisRoute::Interior: return "interior";
    case HypothesisRoute::Separation: return "separation";
    case HypothesisRoute::MinTime: return "min-time";
  }
  return "unknown";
}

nlohmann::json RegionCell::to_json() const {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  return {{"center", vec_json(center)},
          {"route", to_string(route)},
          {"hypothesis_met", hypothesis_met},
          {"lipschitz_observed", lipschitz_observed},
          {"local_constant", num(local_constant)},
          {"refined_constant", num(refined_constant)},
          {"route_margin", num(route_margin)},
          {"chart", chart}};
}

namespace {

std::vector<Vec> cell_samples(const Vec& center, const Vec& half_width, int n) {
  const int m = static_cast<int>(center.size());
  if (half_width.isZero(0.0) || n <= 1) return {center};
  int total = 1;
  for (int d = 0; d < m; ++d) total *= n;
  std::vector<Vec> out;
  for (int k = 0; k < total; ++k) {
    Vec x = center;
    int rem = k;
    for (int d = 0; d < m; ++d) {
      const int i = rem % n;
      rem /= n;
      x(d) += half_width(d) * (-1.0 + (2.0 * i + 1.0) / n);
    }
    out.push_back(x);
  }
  return out;
}

/// Two-sided min-time probes z -> z +- delta along each z axis; returns the
/// largest Q / delta, or +infinity when a probe is not reached.
double min_time_route(const ControlProblem& search, const Vec& c, const std::vector<int>& z_idx,
                      const std::vector<Vec>& controls, const ClassifierOptions& o,
                      const std::vector<std::pair<int, double>>& w_domain = {}) {
  TimeSearchOptions so;
  so.dt = o.search_dt;
  so.h = o.search_h;
  so.cap = o.time_cap;
  so.z_indices = z_idx;
  so.controls = controls;
  // probes stay local: w within a factor 2, z within three displacements
  so.search_box = StateBox{c, c};
  so.prune_outside = true;
  for (Eigen::Index i = 0; i < c.size(); ++i) {
    const bool is_z = std::find(z_idx.begin(), z_idx.end(), static_cast<int>(i)) != z_idx.end();
    const double r = is_z ? 3.0 * o.probe_delta : 0.5 * std::abs(c(i)) + o.probe_delta;
    so.search_box->lo(i) -= r;
    so.search_box->hi(i) += r;
  }
  if (!w_domain.empty()) {
    for (std::size_t j = 0; j < w_domain.size(); ++j) {
      const int i = w_domain[j].first;
      so.search_box->lo(i) = std::max(so.search_box->lo(i), std::max(w_domain[j].second, 0.5 * c(i)));
    }
  }
  double L = 0.0;
  for (std::size_t i = 0; i < z_idx.size(); ++i) {
    for (double sign : {1.0, -1.0}) {
      Vec z = pick(c, z_idx);
      z(static_cast<Eigen::Index>(i)) += sign * o.probe_delta;
      try {
        const auto r = min_time_estimate(search, o.t, c, z, so);
        if (!r.reached) return kInf;
        L = std::max(L, r.time / o.probe_delta);
      } catch (const LatticeOverflowError&) {
        return kInf;
      }
    }
  }
  return L;
}

}  // namespace

RegionCell classify_cell(const ControlProblem& problem, const TimeStateField& V, const Vec& center,
                         const Vec& half_width, const ClassifierOptions& o) {
  RegionCell cell;
  cell.center = center;
  const auto samples = cell_samples(center, half_width, o.sub_samples);

  if (o.charts.empty()) {
    bool inside = true;
    double margin = kInf;
    for (const auto& x : samples) {
      const auto h = interior_convexhull_test(problem, o.t, x);
      inside = inside && h.inside;
      margin = std::min(margin, h.margin);
    }
    if (inside) {
      cell.route = HypothesisRoute::Interior;
      cell.route_margin = margin;
    } else {
      std::vector<std::pair<double, Vec>> pts;
      for (const auto& x : samples) pts.emplace_back(o.t, x);
      const auto sep = separation_test(problem, pts);
      if (sep.separated) {
        cell.route = HypothesisRoute::Separation;
        cell.route_margin = sep.margin;
      } else {
        std::vector<int> all(static_cast<std::size_t>(problem.state_dim()));
        for (int i = 0; i < problem.state_dim(); ++i) all[static_cast<std::size_t>(i)] = i;
        const double L = min_time_route(problem, center, all, problem.control_samples(), o);
        if (std::isfinite(L)) {
          cell.route = HypothesisRoute::MinTime;
          cell.route_margin = L;
        }
      }
    }
  } else {
    for (const auto& ps : o.charts) {
      const auto c = ps.to_chart(center);
      if (!c || (ps.W && !ps.W->contains(ps.w_of(*c)))) continue;
      const auto& search = ps.search_problem(problem);
      const auto& controls = ps.restricted_controls.empty() ? search.control_samples() : ps.restricted_controls;
      std::vector<std::pair<int, double>> w_domain;
      if (ps.W) {
        for (std::size_t j = 0; j < ps.w_indices.size(); ++j) {
          w_domain.emplace_back(ps.w_indices[j], ps.W->lo(static_cast<Eigen::Index>(j)));
        }
      }
      const double L = min_time_route(search, *c, ps.z_indices, controls, o, w_domain);
      if (std::isfinite(L)) {
        cell.route = HypothesisRoute::MinTime;
        cell.route_margin = L;
        cell.chart = ps.name;
        break;
      }
    }
    if (cell.route == HypothesisRoute::None) {
      for (const auto& ps : o.charts) {
        const auto& search = ps.search_problem(problem);
        std::vector<Vec> zvel;
        bool covered = true;
        for (const auto& x : samples) {
          const auto c = ps.to_chart(x);
          if (!c) {
            covered = false;
            break;
          }
          for (const auto& u : search.control_samples()) zvel.push_back(ps.z_of(search.dynamics(o.t, *c, u)));
        }
        if (!covered || zvel.empty()) continue;
        const auto sep = separation_test(zvel);
        if (sep.separated) {
          cell.route = HypothesisRoute::Separation;
          cell.route_margin = sep.margin;
          cell.chart = ps.name;
          break;
        }
      }
    }
  }
  cell.hypothesis_met = cell.route != HypothesisRoute::None;

  if (V) {
    const double t = o.t;
    const StateField field = [&V, t](const Vec& x) { return V(t, x); };
    Vec r = half_width;
    for (Eigen::Index i = 0; i < r.size(); ++i) {
      if (!(r(i) > 0.0)) r(i) = o.point_radius;
    }
    const auto coarse = lipschitz_constant_map(field, center - r, center + r, r / 2.0);
    const auto fine = lipschitz_constant_map(field, center - r, center + r, r / 4.0);
    cell.local_constant = coarse.max;
    cell.refined_constant = fine.max;
    cell.lipschitz_observed = std::isfinite(coarse.max) && std::isfinite(fine.max) &&
                              fine.max <= o.refine_ratio * coarse.max + 1e-9;
  }
  return cell;
}

void RegionMap::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ArgumentError("cannot write " + path);
  const Eigen::Index m = region.lo.size();
  for (Eigen::Index i = 0; i < m; ++i) out << 'x' << i << ',';
  out << "route,hypothesis_met,lipschitz_observed,local_constant,code\n";
  char buf[32];
  for (const auto& c : entries) {
    for (Eigen::Index i = 0; i < m; ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", c.center(i));
      out << buf << ',';
    }
    std::snprintf(buf, sizeof buf, "%.17g", c.local_constant);
    out << to_string(c.route) << ',' << (c.hypothesis_met ? 1 : 0) << ',' << (c.lipschitz_observed ? 1 : 0) << ','
        << buf << ',' << c.code() << '\n';
  }
}

nlohmann::json RegionMap::summary() const {
  nlohmann::json routes = nlohmann::json::object();
  std::size_t hyp = 0, lip = 0;
  for (const auto& c : entries) {
    routes[to_string(c.route)] = routes.value(to_string(c.route), 0) + 1;
    hyp += c.hypothesis_met ? 1 : 0;
    lip += c.lipschitz_observed ? 1 : 0;
  }
  return {{"cells", entries.size()},
          {"resolution", cells},
          {"region", region.to_json()},
          {"routes", routes},
          {"hypothesis_met", hyp},
          {"lipschitz_observed", lip}};
}

RegionMap lipschitz_region_classifier(const ControlProblem& problem, const TimeStateField& V,
                                      const StateBox& region, const std::vector<int>& resolution,
                                      const ClassifierOptions& options) {
  const int m = problem.state_dim();
  if (region.lo.size() != m || static_cast<int>(resolution.size()) != m) {
    throw ArgumentError("region and resolution must match the state dimension");
  }
  RegionMap map;
  map.region = region;
  map.cells = resolution;
  std::size_t total = 1;
  for (int r : resolution) {
    if (r < 1) throw ArgumentError("resolution must be positive");
    total *= static_cast<std::size_t>(r);
  }
  Vec half(m);
  for (int d = 0; d < m; ++d) half(d) = (region.hi(d) - region.lo(d)) / (2.0 * resolution[static_cast<std::size_t>(d)]);
  map.entries.resize(total);
  detail::parallel_chunks(total, configured_threads(), [&](std::size_t b, std::size_t e) {
    for (std::size_t k = b; k < e; ++k) {
      Vec c(m);
      std::size_t rem = k;
      for (int d = 0; d < m; ++d) {
        const auto n = static_cast<std::size_t>(resolution[static_cast<std::size_t>(d)]);
        c(d) = region.lo(d) + half(d) * (2.0 * static_cast<double>(rem % n) + 1.0);
        rem /= n;
      }
      map.entries[k] = classify_cell(problem, V, c, half, options);
    }
  });
  return map;
}

// ---------------------------------------------------------------------------
// Homogeneity of the double integrator

nlohmann::json HomogeneityPair::to_json() const {
  return {{"nu", nu},     {"y", vec_json(y)},          {"lhs", lhs},
          {"rhs", rhs},   {"rel_error", rel_error},    {"stated_rel_error", stated_rel_error}};
}

nlohmann::json HomogeneityReport::to_json() const {
  nlohmann::json vp = nlohmann::json::array(), tp = nlohmann::json::array();
  for (const auto& p : value_pairs) vp.push_back(p.to_json());
  for (const auto& p : trajectory_pairs) tp.push_back(p.to_json());
  return {{"k", k},
          {"exponent", exponent},
          {"stated_exponent", stated_exponent},
          {"cost_homogeneous", cost_homogeneous},
          {"value_pairs", vp},
          {"trajectory_pairs", tp},
          {"max_rel_error", max_rel_error},
          {"stated_max_rel_error", stated_max_rel_error},
          {"pass", pass},
          {"note", note}};
}

HomogeneityReport example2_homogeneity(const ControlProblem& problem, double k, const HomogeneityOptions& o) {
  if (problem.state_dim() != 2) throw ArgumentError("homogeneity check needs the two-state double integrator");
  if (o.nus.empty() || o.pairs < 1) throw ArgumentError("homogeneity check needs scales and pairs");
  HomogeneityReport rep;
  rep.k = k;
  rep.exponent = k + 1.0;
  rep.stated_exponent = k - 1.0;

  std::mt19937_64 rng(o.seed);
  auto uniform = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };

  // g(nu y1, nu^2 y2, u) = nu^k g(y1, y2, u) on random samples
  rep.cost_homogeneous = true;
  for (int i = 0; i < 50; ++i) {
    const Vec y = make_vec({uniform(-2, 2), uniform(-2, 2)});
    const Vec& u = problem.control_samples()[static_cast<std::size_t>(i) % problem.control_samples().size()];
    const double nu = uniform(0.2, 3.0);
    const double lhs = problem.running_cost(0.0, make_vec({nu * y(0), nu * nu * y(1)}), u);
    const double rhs = std::pow(nu, k) * problem.running_cost(0.0, y, u);
    if (std::abs(lhs - rhs) > 1e-9 * std::max(1.0, std::abs(rhs))) rep.cost_homogeneous = false;
  }

  GridSpec base = GridSpec::uniform(o.box.lo, o.box.hi, o.h, o.dt, o.horizon);
  const ValueGrid V = solve_finite_horizon(problem, base);
  auto finish = [&](HomogeneityPair& p, double base_value) {
    p.rhs = std::pow(p.nu, rep.exponent) * base_value;
    p.rel_error = std::abs(p.lhs - p.rhs) / std::max(1.0, std::abs(p.rhs));
    const double stated = std::pow(p.nu, rep.stated_exponent) * base_value;
    p.stated_rel_error = std::abs(p.lhs - stated) / std::max(1.0, std::abs(stated));
    rep.max_rel_error = std::max(rep.max_rel_error, p.rel_error);
    rep.stated_max_rel_error = std::max(rep.stated_max_rel_error, p.stated_rel_error);
  };
  for (std::size_t s = 0; s < o.nus.size(); ++s) {
    const double nu = o.nus[s];
    if (!(nu > 0.0)) throw ArgumentError("scales must be positive");
    GridSpec scaled = base;
    scaled.lower = make_vec({nu * base.lower(0), nu * nu * base.lower(1)});
    scaled.upper = make_vec({nu * base.upper(0), nu * nu * base.upper(1)});
    scaled.spacing = make_vec({nu * base.spacing(0), nu * nu * base.spacing(1)});
    scaled.dt = nu * base.dt;
    scaled.horizon = nu * base.horizon;
    const ValueGrid Vs = solve_finite_horizon(problem, scaled);
    const int count = o.pairs / static_cast<int>(o.nus.size()) +
                      (static_cast<int>(s) < o.pairs % static_cast<int>(o.nus.size()) ? 1 : 0);
    for (int i = 0; i < count; ++i) {
      HomogeneityPair p;
      p.nu = nu;
      p.y = make_vec({uniform(o.query_box.lo(0), o.query_box.hi(0)), uniform(o.query_box.lo(1), o.query_box.hi(1))});
      p.lhs = Vs.evaluate(0.0, make_vec({nu * p.y(0), nu * nu * p.y(1)}));
      finish(p, V.evaluate(0.0, p.y));
      rep.value_pairs.push_back(p);

      // same query along a switching control, scaled in time
      HomogeneityPair q = p;
      const Vec& lo = problem.control_box().lo;
      const Vec& hi = problem.control_box().hi;
      const Vec u1 = lo + (hi - lo) * uniform(0.0, 1.0), u2 = lo + (hi - lo) * uniform(0.0, 1.0);
      const double sw = uniform(0.1, 0.9) * o.horizon;
      const ControlSignal u({0.0, sw}, {u1, u2});
      const ControlSignal u_nu({0.0, nu * sw}, {u1, u2});
      const auto tb = integrate_trajectory(problem, p.y, 0.0, u, o.horizon);
      const auto ts = integrate_trajectory(problem, make_vec({nu * p.y(0), nu * nu * p.y(1)}), 0.0, u_nu,
                                           nu * o.horizon);
      q.lhs = accumulate_cost(problem, ts, 0.0, nu * o.horizon);
      finish(q, accumulate_cost(problem, tb, 0.0, o.horizon));
      rep.trajectory_pairs.push_back(q);
    }
  }
  rep.pass = rep.cost_homogeneous && rep.max_rel_error <= o.tol;
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "scaling uses exponent k+1 = %g with horizon nu*T; the stated exponent k-1 = %g gives max relative "
                "error %.3g",
                rep.exponent, rep.stated_exponent, rep.stated_max_rel_error);
  rep.note = buf;
  return rep;
}

}  // namespace horizonlab
