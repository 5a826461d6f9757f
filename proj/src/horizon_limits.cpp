#include "horizonlab/horizon_limits.hpp"

#include "parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

namespace horizonlab {

HorizonSequence::HorizonSequence(std::vector<double> values) : taus(std::move(values)) {
  if (taus.empty()) throw ArgumentError("horizon sequence is empty");
  for (std::size_t i = 0; i < taus.size(); ++i) {
    if (!(taus[i] > 0.0) || !std::isfinite(taus[i])) {
      throw ArgumentError("horizons must be positive and finite");
    }
    if (i > 0 && !(taus[i] > taus[i - 1])) throw ArgumentError("horizons must be strictly increasing");
  }
}

HorizonSequence HorizonSequence::geometric(double t0, double ratio, int count) {
  if (!(t0 > 0.0) || !(ratio > 1.0) || count < 1) {
    throw ArgumentError("geometric horizons need t0 > 0, ratio > 1, count >= 1");
  }
  std::vector<double> v;
  double tau = t0;
  for (int n = 0; n < count; ++n, tau *= ratio) v.push_back(tau);
  return HorizonSequence(std::move(v));
}

std::vector<double> HorizonSequence::tail() const {
  const std::size_t keep = (taus.size() + 1) / 2;
  return {taus.end() - static_cast<std::ptrdiff_t>(keep), taus.end()};
}

std::string to_string(LimitVariant variant) {
  switch (variant) {
    case LimitVariant::All: return "all";
    case LimitVariant::LiminfSequence: return "liminf-sequence";
    case LimitVariant::InfOverControls: return "inf-over-controls";
    case LimitVariant::Diamond: return "diamond";
  }
  return "unknown";
}

nlohmann::json LimitEstimate::to_json() const {
  nlohmann::json j = {{"variant", to_string(variant)},
                      {"taus", taus},
                      {"values", values},
                      {"limit", limit},
                      {"gap", gap},
                      {"tolerance", tolerance},
                      {"converged", converged},
                      {"extrapolated", extrapolated},
                      {"liminf_bias", liminf_bias},
                      {"note", note}};
  j["argmin"] = argmin ? argmin->to_json() : nlohmann::json(nullptr);
  return j;
}

LimitEstimate summarize_limit(LimitVariant variant, std::vector<double> taus,
                              std::vector<double> values, double tolerance) {
  if (values.empty() || values.size() != taus.size()) {
    throw ArgumentError("limit summary needs one value per horizon");
  }
  LimitEstimate e;
  e.variant = variant;
  e.tolerance = tolerance;
  e.taus = std::move(taus);
  e.values = std::move(values);
  const auto& v = e.values;
  const std::size_t n = v.size();

  const std::size_t first = n >= 3 ? n - 3 : 0;
  const auto [lo, hi] = std::minmax_element(v.begin() + static_cast<std::ptrdiff_t>(first), v.end());
  e.gap = *hi - *lo;

  const bool liminf = variant != LimitVariant::All;
  e.liminf_bias = liminf;
  if (liminf) {
    const std::size_t keep = (n + 1) / 2;
    e.limit = *std::min_element(v.end() - static_cast<std::ptrdiff_t>(keep), v.end());
  } else {
    e.limit = v.back();
  }
  if (!std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); })) {
    e.note = "non-finite per-horizon value";
    e.converged = false;
    return e;
  }
  if (n == 1) {
    e.note = "single horizon";
    return e;
  }

  const double tiny = 1e-3 * tolerance;
  std::vector<double> d;
  for (std::size_t k = 1; k < n; ++k) d.push_back(v[k] - v[k - 1]);
  const double dn = d.back();
  const bool negligible = std::abs(dn) <= tiny && (d.size() < 2 || std::abs(d[d.size() - 2]) <= tiny);
  if (negligible) {
    e.converged = e.gap <= tolerance;
    return e;
  }
  if (d.size() < 2) {
    e.note = "too few horizons to judge decay";
    return e;
  }
  const double dp = d[d.size() - 2];
  if ((dn > 0) != (dp > 0) && std::abs(dp) > tiny) {
    e.note = "oscillating differences";
    return e;
  }
  const double r = std::abs(dp) > 0.0 ? dn / dp : 1.0;
  bool geometric = r >= 0.0 && r <= 0.75;
  if (d.size() >= 3 && std::abs(d[d.size() - 3]) > tiny) {
    const double r2 = dp / d[d.size() - 3];
    geometric = geometric && r2 >= 0.0 && r2 <= 0.75;
  }
  if (!geometric) {
    e.note = "differences not decaying geometrically";
    return e;
  }
  if (!liminf) {
    e.limit = v.back() + dn * r / (1.0 - r);
    e.extrapolated = true;
  }
  e.converged = e.gap <= tolerance;
  return e;
}

namespace {

std::vector<double> per_horizon_values(const ControlProblem& problem, const GridSpec& spec,
                                       const HorizonSequence& seq, double t, const Vec& b,
                                       const LimitOptions& options) {
  if (seq.size() == 0) throw ArgumentError("horizon sequence is empty");
  std::vector<double> values;
  for (double tau : seq.taus) {
    if (!(tau > t)) throw ArgumentError("every horizon must exceed t");
    const GridSpec s = spec.with_horizon(tau);
    if (options.cache) {
      values.push_back(options.cache->get(problem, s)->evaluate(t, b));
    } else {
      values.push_back(solve_finite_horizon(problem, s).evaluate(t, b));
    }
  }
  return values;
}

}  // namespace

LimitEstimate estimate_v_all(const ControlProblem& problem, const GridSpec& spec,
                             const HorizonSequence& seq, double t, const Vec& b,
                             const LimitOptions& options) {
  return summarize_limit(LimitVariant::All, seq.taus,
                         per_horizon_values(problem, spec, seq, t, b, options), options.tolerance);
}

LimitEstimate estimate_v_infty(const ControlProblem& problem, const GridSpec& spec,
                               const HorizonSequence& seq, double t, const Vec& b,
                               const LimitOptions& options) {
  return summarize_limit(LimitVariant::LiminfSequence, seq.taus,
                         per_horizon_values(problem, spec, seq, t, b, options), options.tolerance);
}

// ---------------------------------------------------------------------------
// V^inf over a finite control family

ControlFamily ControlFamily::standard(const ControlProblem& problem, const HorizonSequence& seq) {
  ControlFamily f;
  const auto& box = problem.control_box();
  const int m = problem.control_dim();
  constexpr int kLevels = 5;
  int total = 1;
  for (int d = 0; d < m; ++d) total *= kLevels;
  for (int k = 0; k < total; ++k) {
    Vec u(m);
    int rem = k;
    for (int d = 0; d < m; ++d) {
      const int i = rem % kLevels;
      rem /= kLevels;
      u(d) = box.lo(d) + (box.hi(d) - box.lo(d)) * i / (kLevels - 1);
    }
    f.levels.push_back(u);
  }
  f.switch_window = 0.5 * seq.tail().front();
  return f;
}

std::vector<ControlSignal> ControlFamily::enumerate(double t) const {
  if (levels.empty()) throw ArgumentError("control family has no levels");
  if (max_switches < 0 || max_switches > 2) throw ArgumentError("control family allows 0..2 switches");
  std::vector<double> switches;
  if (switch_step > 0.0) {
    for (int k = 1; k * switch_step <= switch_window + 1e-12; ++k) switches.push_back(t + k * switch_step);
  }
  std::vector<ControlSignal> out;
  for (const auto& v : levels) out.push_back(ControlSignal::constant(v));
  if (max_switches >= 1) {
    for (const auto& v1 : levels)
      for (const auto& v2 : levels) {
        if (v1 == v2) continue;
        for (double s : switches) out.emplace_back(std::vector<double>{0.0, s}, std::vector<Vec>{v1, v2});
      }
  }
  if (max_switches >= 2) {
    for (const auto& v1 : levels)
      for (const auto& v2 : levels) {
        if (v1 == v2) continue;
        for (const auto& v3 : levels) {
          if (v3 == v2) continue;
          for (std::size_t a = 0; a < switches.size(); ++a)
            for (std::size_t c = a + 1; c < switches.size(); ++c)
              out.emplace_back(std::vector<double>{0.0, switches[a], switches[c]},
                               std::vector<Vec>{v1, v2, v3});
        }
      }
  }
  return out;
}

nlohmann::json ControlFamily::to_json() const {
  nlohmann::json lv = nlohmann::json::array();
  for (const auto& v : levels) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) row.push_back(v(i));
    lv.push_back(row);
  }
  return {{"levels", lv},
          {"switch_step", switch_step},
          {"switch_window", switch_window},
          {"max_switches", max_switches},
          {"integration_step", integration_step}};
}

std::vector<double> horizon_costs(const ControlProblem& problem, const Vec& b, double t,
                                  const ControlSignal& u, const HorizonSequence& seq,
                                  double integration_step) {
  if (!(seq.front() > t)) throw ArgumentError("every horizon must exceed t");
  const Trajectory traj = integrate_trajectory(problem, b, t, u, seq.back(), integration_step);
  std::vector<double> out;
  out.reserve(seq.size());
  for (double tau : seq.taus) out.push_back(accumulate_cost(problem, traj, t, tau));
  return out;
}

LimitEstimate estimate_v_inf(const ControlProblem& problem, const Vec& b, double t,
                             const ControlFamily& family, const HorizonSequence& seq,
                             double tolerance) {
  const auto controls = family.enumerate(t);
  if (controls.empty()) throw ArgumentError("empty control family");
  const std::size_t keep = (seq.size() + 1) / 2;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> score(controls.size(), kInf);
  std::vector<std::vector<double>> costs(controls.size());
  detail::parallel_chunks(controls.size(), configured_threads(), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t k = lo; k < hi; ++k) {
      try {
        costs[k] = horizon_costs(problem, b, t, controls[k], seq, family.integration_step);
      } catch (const BlowUpError&) {
        continue;
      }
      score[k] = *std::min_element(costs[k].end() - static_cast<std::ptrdiff_t>(keep), costs[k].end());
    }
  });
  std::size_t best = controls.size();
  for (std::size_t k = 0; k < controls.size(); ++k) {
    if (std::isfinite(score[k]) && (best == controls.size() || score[k] < score[best])) best = k;
  }
  if (best == controls.size()) {
    LimitEstimate e;
    e.variant = LimitVariant::InfOverControls;
    e.taus = seq.taus;
    e.values.assign(seq.size(), kInf);
    e.limit = kInf;
    e.gap = kInf;
    e.tolerance = tolerance;
    e.note = "every family member blew up";
    return e;
  }
  LimitEstimate e = summarize_limit(LimitVariant::InfOverControls, seq.taus, costs[best], tolerance);
  e.argmin = controls[best];
  const long skipped = std::count(score.begin(), score.end(), kInf);
  if (skipped > 0) {
    e.note += (e.note.empty() ? "" : "; ") + std::to_string(skipped) + " family members blew up";
  }
  return e;
}

// ---------------------------------------------------------------------------
// Lipschitz maps

LipschitzMap lipschitz_constant_map(const StateField& field, const Vec& lower, const Vec& upper,
                                    const Vec& spacing) {
  GridSpec region = GridSpec::uniform(lower, upper, 1.0, 1.0, 1.0);
  region.spacing = spacing;
  region.validate();
  const auto counts = region.node_counts();
  const Vec h = region.effective_spacing();
  const int dim = region.dim();
  std::size_t nodes = 1;
  for (int c : counts) nodes *= static_cast<std::size_t>(c);

  std::vector<double> vals(nodes);
  std::vector<std::size_t> stride(dim, 1);
  for (int d = 1; d < dim; ++d) stride[d] = stride[d - 1] * static_cast<std::size_t>(counts[d - 1]);
  auto multi = [&](std::size_t node) {
    std::vector<int> idx(dim);
    for (int d = 0; d < dim; ++d) {
      idx[d] = static_cast<int>((node / stride[d]) % static_cast<std::size_t>(counts[d]));
    }
    return idx;
  };
  for (std::size_t j = 0; j < nodes; ++j) {
    const auto idx = multi(j);
    Vec x(dim);
    for (int d = 0; d < dim; ++d) x(d) = idx[d] == counts[d] - 1 ? upper(d) : lower(d) + h(d) * idx[d];
    vals[j] = field(x);
  }

  LipschitzMap map;
  map.lower = lower;
  map.spacing = h;
  for (int d = 0; d < dim; ++d) map.cells.push_back(std::max(1, counts[d] - 1));
  std::size_t ncell = 1;
  for (int c : map.cells) ncell *= static_cast<std::size_t>(c);
  map.constants.resize(ncell, 0.0);
  for (std::size_t c = 0; c < ncell; ++c) {
    std::size_t rem = c, node = 0;
    for (int d = 0; d < dim; ++d) {
      const auto i = rem % static_cast<std::size_t>(map.cells[d]);
      rem /= static_cast<std::size_t>(map.cells[d]);
      node += i * stride[d];
    }
    double k = 0.0;
    for (int d = 0; d < dim; ++d) {
      if (counts[d] < 2) continue;
      k = std::max(k, std::abs(vals[node + stride[d]] - vals[node]) / h(d));
    }
    map.constants[c] = k;
    map.max = std::max(map.max, k);
  }
  return map;
}

LipschitzMap lipschitz_constant_map(const ValueGrid& grid, const Vec& lower, const Vec& upper,
                                    double t) {
  const auto& spec = grid.spec();
  if (lower.size() != spec.dim() || upper.size() != spec.dim()) {
    throw ArgumentError("region dimension does not match the grid");
  }
  const Vec& h = grid.spacing();
  Vec lo(spec.dim()), hi(spec.dim());
  for (int d = 0; d < spec.dim(); ++d) {
    if (lower(d) < spec.lower(d) - 1e-12 || upper(d) > spec.upper(d) + 1e-12 || !(lower(d) < upper(d))) {
      throw ArgumentError("region must lie inside the grid box");
    }
    const double a = std::ceil((lower(d) - spec.lower(d)) / h(d) - 1e-9);
    const double b = std::floor((upper(d) - spec.lower(d)) / h(d) + 1e-9);
    lo(d) = spec.lower(d) + a * h(d);
    hi(d) = spec.lower(d) + std::max(b, a + 1.0) * h(d);
  }
  return lipschitz_constant_map([&grid, t](const Vec& x) { return grid.evaluate(t, x); }, lo, hi, h);
}

void write_limit_trace_csv(const std::vector<LimitEstimate>& estimates, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ArgumentError("cannot write " + path);
  out << "variant,tau,value,gap\n";
  char buf[128];
  for (const auto& e : estimates) {
    for (std::size_t k = 0; k < e.values.size(); ++k) {
      const double g = k == 0 ? 0.0 : std::abs(e.values[k] - e.values[k - 1]);
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g", e.taus[k], e.values[k], g);
      out << to_string(e.variant) << ',' << buf << '\n';
    }
  }
}

}  // namespace horizonlab
