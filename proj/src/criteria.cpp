#include "horizonlab/criteria.hpp"

#include "parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <sstream>

namespace horizonlab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

nlohmann::json vec_json(const Vec& v) {
  nlohmann::json j = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v(i));
  return j;
}

Vec json_vec(const nlohmann::json& j) {
  if (j.is_number()) return scalar_vec(j.get<double>());
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return v;
}

std::string fmt(double v, const char* spec = "%.6g") {
  char buf[48];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

/// Calls fn(k, lo, hi) for each piece of [a, b] cut by the trajectory steps.
template <typename Fn>
void for_each_piece(const Trajectory& traj, double a, double b, Fn&& fn) {
  for (std::size_t k = traj.step_index(a); k < traj.num_steps(); ++k) {
    const double lo = std::max(traj.times[k], a);
    const double hi = std::min(traj.times[k + 1], b);
    if (traj.times[k] >= b) break;
    if (hi <= lo) continue;
    fn(k, lo, hi);
  }
}

}  // namespace

std::string to_string(Verdict verdict) {
  switch (verdict) {
    case Verdict::Pass: return "pass";
    case Verdict::Fail: return "fail";
    case Verdict::Inconclusive: return "inconclusive";
  }
  return "inconclusive";
}

Verdict verdict_for(double residual, double tol) {
  if (!std::isfinite(residual)) return Verdict::Inconclusive;
  if (residual < tol) return Verdict::Pass;
  if (residual == tol) return Verdict::Inconclusive;
  return Verdict::Fail;
}

Verdict tail_verdict(double statistic, double tol) {
  if (!std::isfinite(statistic)) return Verdict::Fail;
  if (statistic < tol) return Verdict::Pass;
  if (statistic < 10.0 * tol) return Verdict::Inconclusive;
  return Verdict::Fail;
}

nlohmann::json MembershipResult::to_json() const {
  return {{"verdict", to_string(verdict)}, {"statistic", statistic}, {"evidence", evidence}};
}

// ---------------------------------------------------------------------------
// Constraints

AsymptoticConstraint AsymptoticConstraint::unrestricted() { return {}; }

AsymptoticConstraint AsymptoticConstraint::bounded() {
  AsymptoticConstraint c;
  c.kind_ = ConstraintKind::Bounded;
  return c;
}

AsymptoticConstraint AsymptoticConstraint::lp(double p) {
  if (!(p >= 1.0)) throw ArgumentError("Lp constraint needs p >= 1");
  AsymptoticConstraint c;
  c.kind_ = ConstraintKind::LpIntegrable;
  c.p_ = p;
  return c;
}

AsymptoticConstraint AsymptoticConstraint::target_set(std::vector<Vec> points) {
  if (points.empty()) throw ArgumentError("target set M must be nonempty");
  AsymptoticConstraint c;
  c.kind_ = ConstraintKind::TargetSet;
  c.targets_ = std::move(points);
  return c;
}

AsymptoticConstraint AsymptoticConstraint::riemann() {
  AsymptoticConstraint c;
  c.kind_ = ConstraintKind::RiemannConvergent;
  return c;
}

AsymptoticConstraint AsymptoticConstraint::lebesgue() {
  AsymptoticConstraint c;
  c.kind_ = ConstraintKind::LebesgueConvergent;
  return c;
}

AsymptoticConstraint AsymptoticConstraint::custom(std::string name, CustomMembership predicate) {
  if (!predicate) throw ArgumentError("custom constraint needs a predicate");
  AsymptoticConstraint c;
  c.kind_ = ConstraintKind::Custom;
  c.custom_name_ = std::move(name);
  c.predicate_ = std::move(predicate);
  return c;
}

std::string AsymptoticConstraint::name() const {
  switch (kind_) {
    case ConstraintKind::Unrestricted: return "unrestricted";
    case ConstraintKind::Bounded: return "bounded";
    case ConstraintKind::LpIntegrable: return "lp";
    case ConstraintKind::TargetSet: return "target-set";
    case ConstraintKind::RiemannConvergent: return "riemann";
    case ConstraintKind::LebesgueConvergent: return "lebesgue";
    case ConstraintKind::Custom: return "custom:" + custom_name_;
  }
  return "unknown";
}

nlohmann::json AsymptoticConstraint::to_json() const {
  nlohmann::json j = {{"kind", name()}};
  if (kind_ == ConstraintKind::LpIntegrable) j["p"] = p_;
  if (kind_ == ConstraintKind::TargetSet) {
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& m : targets_) pts.push_back(vec_json(m));
    j["targets"] = pts;
  }
  return j;
}

AsymptoticConstraint AsymptoticConstraint::from_json(const nlohmann::json& j) {
  const std::string kind = j.is_string() ? j.get<std::string>() : j.at("kind").get<std::string>();
  if (kind == "unrestricted") return unrestricted();
  if (kind == "bounded") return bounded();
  if (kind == "lp") return lp(j.is_object() ? j.value("p", 1.0) : 1.0);
  if (kind == "riemann") return riemann();
  if (kind == "lebesgue") return lebesgue();
  if (kind == "target-set") {
    std::vector<Vec> pts;
    for (const auto& p : j.at("targets")) pts.push_back(json_vec(p));
    return target_set(std::move(pts));
  }
  throw ArgumentError("unknown asymptotic constraint '" + kind + "'");
}

MembershipResult membership_from_trajectory(const ControlProblem& problem, const Trajectory& traj,
                                            const AsymptoticConstraint& c, double T_max, double tol) {
  if (c.kind() == ConstraintKind::Custom) {
    return c.predicate()(problem, traj.states.front(), traj.start_time, traj.control, T_max, tol);
  }
  MembershipResult r;
  if (c.kind() == ConstraintKind::Unrestricted || c.kind() == ConstraintKind::Bounded) {
    r.verdict = Verdict::Pass;
    r.evidence = "piecewise-constant controls are bounded on compacts";
    return r;
  }
  if (traj.end_time() < T_max - 1e-9) throw ArgumentError("trajectory does not reach T_max");
  const double a = 0.75 * T_max;
  double stat = 0.0;
  switch (c.kind()) {
    case ConstraintKind::RiemannConvergent: {
      double G = 0.0, lo = 0.0, hi = 0.0;
      for_each_piece(traj, a, T_max, [&](std::size_t k, double s0, double s1) {
        G += accumulate_cost(problem, traj, s0, s1);
        (void)k;
        lo = std::min(lo, G);
        hi = std::max(hi, G);
      });
      stat = hi - lo;
      r.evidence = "max |int_{T1}^{T2} f0| over the top quarter";
      break;
    }
    case ConstraintKind::LebesgueConvergent: {
      for_each_piece(traj, a, T_max, [&](std::size_t k, double s0, double s1) {
        const Vec& u = traj.step_controls[k];
        const double m = 0.5 * (s0 + s1);
        stat += (s1 - s0) / 6.0 *
                (std::abs(problem.running_cost(s0, traj.state_at(s0), u)) +
                 4.0 * std::abs(problem.running_cost(m, traj.state_at(m), u)) +
                 std::abs(problem.running_cost(s1, traj.state_at(s1), u)));
      });
      r.evidence = "int |f0| over the top quarter";
      break;
    }
    case ConstraintKind::LpIntegrable: {
      for_each_piece(traj, a, T_max, [&](std::size_t k, double s0, double s1) {
        stat += (s1 - s0) * std::pow(traj.step_controls[k].norm(), c.p());
      });
      r.evidence = "int |u|^p over the top quarter";
      break;
    }
    case ConstraintKind::TargetSet: {
      auto dist = [&](const Vec& x) {
        double d = kInf;
        for (const auto& m : c.targets()) d = std::min(d, (x - m).norm());
        return d;
      };
      stat = dist(traj.state_at(a));
      for (std::size_t k = 0; k < traj.times.size(); ++k) {
        if (traj.times[k] > a && traj.times[k] <= T_max + 1e-12) stat = std::max(stat, dist(traj.states[k]));
      }
      r.evidence = "sup dist(x(s), M) over the top quarter";
      break;
    }
    default:
      break;
  }
  r.statistic = stat;
  r.verdict = tail_verdict(stat, tol);
  return r;
}

MembershipResult check_constraint_membership(const ControlProblem& problem, const Vec& b, double t,
                                             const ControlSignal& u, const AsymptoticConstraint& c,
                                             double T_max, double tol) {
  if (!(T_max >= 4.0 * t + 4.0)) throw ArgumentError("membership test needs T_max >= 4t + 4");
  if (c.kind() == ConstraintKind::Custom) return c.predicate()(problem, b, t, u, T_max, tol);
  if (c.kind() == ConstraintKind::Unrestricted || c.kind() == ConstraintKind::Bounded) {
    return membership_from_trajectory(problem, Trajectory{}, c, T_max, tol);
  }
  try {
    const Trajectory traj = integrate_trajectory(problem, b, t, u, T_max, kMembershipStep);
    return membership_from_trajectory(problem, traj, c, T_max, tol);
  } catch (const BlowUpError& e) {
    MembershipResult r;
    r.verdict = Verdict::Fail;
    r.statistic = kInf;
    r.evidence = e.what();
    return r;
  }
}

bool concatenation_axiom_test(const AsymptoticConstraint& c, const ControlProblem& problem, int samples,
                              unsigned seed, double T_max) {
  if (samples < 10) throw ArgumentError("concatenation test needs at least 10 samples");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto& levels = problem.control_samples();
  auto pick = [&]() { return levels[static_cast<std::size_t>(unit(rng) * levels.size()) % levels.size()]; };
  auto random_signal = [&](double from) {
    if (unit(rng) < 0.5) return ControlSignal::constant(pick());
    const Vec v1 = pick();
    Vec v2 = pick();
    if (v2 == v1) return ControlSignal::constant(v1);
    return ControlSignal({0.0, from + 0.25 + 2.0 * unit(rng)}, {v1, v2});
  };
  const int m = problem.state_dim();
  for (int k = 0; k < samples; ++k) {
    Vec b(m);
    for (int d = 0; d < m; ++d) b(d) = -1.0 + 2.0 * unit(rng);
    const double t = 2.0 * unit(rng);
    const double T = t + 0.5 + 3.5 * unit(rng);
    const ControlSignal u = random_signal(t);
    const ControlSignal u1 = random_signal(T);
    const double horizon = std::max(T_max, 4.0 * T + 4.0);
    const auto whole = check_constraint_membership(problem, b, t, concatenate(u, T, u1), c, horizon);
    Vec xT;
    try {
      xT = integrate_trajectory(problem, b, t, u, T, kMembershipStep).final_state();
    } catch (const BlowUpError&) {
      if (whole.verdict == Verdict::Pass) return false;
      continue;
    }
    const auto tail = check_constraint_membership(problem, xT, T, u1, c, horizon);
    if ((whole.verdict == Verdict::Pass) != (tail.verdict == Verdict::Pass)) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Reports

nlohmann::json CriterionResult::to_json() const {
  return {{"criterion", criterion}, {"verdict", to_string(verdict)}, {"residual", residual},
          {"tolerance", tolerance}, {"horizons", horizons},           {"witness", witness},
          {"reason", reason}};
}

nlohmann::json OptimalityReport::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& e : entries) rows.push_back(e.to_json());
  return {{"problem", problem}, {"control", control}, {"criteria", rows}};
}

std::string OptimalityReport::summary_table() const {
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof line, "%-28s %-13s %-12s %-9s %s\n", "criterion", "verdict", "residual", "tol",
                "horizons");
  os << line;
  for (const auto& e : entries) {
    std::string hz;
    for (std::size_t i = 0; i < e.horizons.size(); ++i) hz += (i ? "," : "") + fmt(e.horizons[i], "%g");
    std::snprintf(line, sizeof line, "%-28s %-13s %-12s %-9s %s\n", e.criterion.c_str(),
                  to_string(e.verdict).c_str(), fmt(e.residual, "%.3e").c_str(), fmt(e.tolerance, "%g").c_str(),
                  hz.c_str());
    os << line;
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Optimality in view of V

InViewResiduals optimal_in_view_residual(const TimeStateField& V, const ControlProblem& problem,
                                         const ControlSignal& u, const std::vector<double>& T_list, double tol,
                                         double integration_step) {
  if (T_list.empty()) throw ArgumentError("optimal_in_view_residual needs horizons");
  InViewResiduals out;
  out.horizons = T_list;
  const Vec& b = problem.initial_state();
  const double Tmax = *std::max_element(T_list.begin(), T_list.end());
  const double v0 = V(0.0, b);
  std::optional<Trajectory> traj;
  if (Tmax > 0.0) traj = integrate_trajectory(problem, b, 0.0, u, Tmax, integration_step);
  double worst = 0.0, worst_T = 0.0;
  for (double T : T_list) {
    if (T < 0.0) throw ArgumentError("horizons must be nonnegative");
    double r = 0.0;
    if (T > 0.0) r = V(T, traj->state_at(T)) + accumulate_cost(problem, *traj, 0.0, T) - v0;
    out.residuals.push_back(r);
    if (!(std::abs(r) <= worst)) {
      worst = std::abs(r);
      worst_T = T;
    }
  }
  auto& res = out.result;
  res.criterion = "optimal-in-view";
  res.residual = worst;
  res.tolerance = tol;
  res.horizons = T_list;
  res.verdict = verdict_for(worst, tol);
  res.witness = {{"residuals", out.residuals}, {"worst_T", worst_T}};
  return out;
}

// ---------------------------------------------------------------------------
// Constrained value

DiamondEstimate diamond_value(const ControlProblem& problem, const Vec& b, double t,
                              const AsymptoticConstraint& c, const ControlFamily& family,
                              const HorizonSequence& horizons, const DiamondOptions& options) {
  if (!(horizons.front() > t)) throw ArgumentError("every horizon must exceed t");
  const double T_max = options.T_max > 0.0 ? options.T_max : std::max(horizons.back(), 4.0 * t + 4.0);
  if (T_max < horizons.back()) throw ArgumentError("T_max must cover the horizon sequence");
  const auto controls = family.enumerate(t);
  const std::size_t keep = (horizons.size() + 1) / 2;

  DiamondEstimate out;
  out.family_size = controls.size();
  std::vector<double> score(controls.size(), kInf);
  std::vector<std::vector<double>> costs(controls.size());
  detail::parallel_chunks(controls.size(), configured_threads(), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t k = lo; k < hi; ++k) {
      Trajectory traj;
      try {
        traj = integrate_trajectory(problem, b, t, controls[k], T_max, family.integration_step);
      } catch (const BlowUpError&) {
        continue;
      }
      if (membership_from_trajectory(problem, traj, c, T_max, options.tol).verdict != Verdict::Pass) continue;
      for (double tau : horizons.taus) costs[k].push_back(accumulate_cost(problem, traj, t, tau));
      score[k] = *std::min_element(costs[k].end() - static_cast<std::ptrdiff_t>(keep), costs[k].end());
    }
  });
  std::size_t best = controls.size();
  for (std::size_t k = 0; k < controls.size(); ++k) {
    if (!std::isfinite(score[k])) continue;
    ++out.feasible;
    if (best == controls.size() || score[k] < score[best]) best = k;
  }
  if (best == controls.size()) {
    auto& e = out.estimate;
    e.variant = LimitVariant::Diamond;
    e.taus = horizons.taus;
    e.values.assign(horizons.size(), kInf);
    e.limit = kInf;
    e.gap = kInf;
    e.tolerance = options.tol;
    e.note = "no family member satisfies the constraint";
    return out;
  }
  out.estimate = summarize_limit(LimitVariant::Diamond, horizons.taus, costs[best], options.tol);
  out.estimate.argmin = controls[best];

  if (options.dpp_check && t + 1.0 < horizons.front()) {
    ControlFamily inner = family;
    inner.max_switches = std::min(1, family.max_switches);
    DiamondOptions sub = options;
    sub.dpp_check = false;
    sub.T_max = 0.0;
    const auto value = [&](double s, const Vec& x) {
      return diamond_value(problem, x, s, c, inner, horizons, sub).estimate.limit;
    };
    DppOptions dpp;
    dpp.integration_step = family.integration_step;
    // the spot check ranges over the family's levels, not the full control lattice
    out.dpp_residual = dpp_residual(value, problem.with_control_samples(family.levels), t, t + 1.0, b, dpp);
  }
  return out;
}

CriterionResult constrained_optimality_check(const ControlProblem& problem, const ControlSignal& u,
                                             const AsymptoticConstraint& c, const HorizonSequence& horizons,
                                             const ControlFamily& family, double tol) {
  CriterionResult r;
  r.criterion = c.kind() == ConstraintKind::LebesgueConvergent  ? "classical"
                : c.kind() == ConstraintKind::RiemannConvergent ? "almost-strong"
                                                                : "constrained(" + c.name() + ")";
  r.tolerance = tol;
  r.horizons = horizons.taus;
  const Vec& b = problem.initial_state();
  const double T_max = std::max(horizons.back(), 4.0);
  const auto member = check_constraint_membership(problem, b, 0.0, u, c, T_max, tol);
  r.witness["membership"] = member.to_json();
  if (member.verdict != Verdict::Pass) {
    r.verdict = member.verdict;
    r.residual = member.statistic;
    r.reason = "u* " + std::string(member.verdict == Verdict::Fail ? "fails" : "is inconclusive for") +
               " the " + c.name() + " membership test";
    return r;
  }
  const auto own = horizon_costs(problem, b, 0.0, u, horizons, family.integration_step);
  const auto mine = summarize_limit(LimitVariant::InfOverControls, horizons.taus, own, tol);
  DiamondOptions opt;
  opt.tol = tol;
  opt.dpp_check = false;
  const auto diamond = diamond_value(problem, b, 0.0, c, family, horizons, opt);
  r.witness["liminf_J"] = mine.limit;
  r.witness["diamond"] = diamond.estimate.to_json();
  if (!std::isfinite(diamond.estimate.limit) || !std::isfinite(mine.limit)) {
    r.verdict = Verdict::Inconclusive;
    r.residual = kInf;
    r.reason = "constrained value is not finite";
    return r;
  }
  r.residual = std::abs(mine.limit - diamond.estimate.limit);
  r.verdict = verdict_for(r.residual, tol);
  return r;
}

// ---------------------------------------------------------------------------
// Agreeable families

namespace {

std::shared_ptr<const ValueGrid> grid_for(const ControlProblem& problem, const GridSpec& spec, double T,
                                          ValueGridCache* cache) {
  const GridSpec s = spec.with_horizon(T);
  if (cache) return cache->get(problem, s);
  return std::make_shared<const ValueGrid>(solve_finite_horizon(problem, s));
}

}  // namespace

CriterionResult weak_agreeable_check(const ControlProblem& problem, const ControlSignal& u,
                                     const GridSpec& spec, const HorizonSequence& taus,
                                     const std::vector<double>& T_list, const CriteriaOptions& options) {
  if (T_list.empty()) throw ArgumentError("weak_agreeable_check needs horizons T");
  const double Tmax = *std::max_element(T_list.begin(), T_list.end());
  if (!(Tmax < taus.front())) throw ArgumentError("weak_agreeable_check needs max T < min tau");
  CriterionResult r;
  r.criterion = "weakly-agreeable";
  r.tolerance = options.tol;
  r.horizons = taus.taus;
  const Vec& b = problem.initial_state();
  std::optional<Trajectory> traj;
  if (Tmax > 0.0) traj = integrate_trajectory(problem, b, 0.0, u, Tmax, options.integration_step);

  std::vector<std::vector<double>> gaps(T_list.size());
  for (double tau : taus.taus) {
    const auto V = grid_for(problem, spec, tau, options.cache);
    const double v0 = V->evaluate(0.0, b);
    for (std::size_t i = 0; i < T_list.size(); ++i) {
      const double T = T_list[i];
      if (T <= 0.0) {
        gaps[i].push_back(0.0);
        continue;
      }
      const double g = v0 - V->evaluate(T, traj->state_at(T));
      gaps[i].push_back(std::abs(accumulate_cost(problem, *traj, 0.0, T) - g));
    }
  }
  bool monotone = true;
  double worst = 0.0, worst_T = T_list.front();
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < T_list.size(); ++i) {
    for (std::size_t n = 1; n < gaps[i].size(); ++n) {
      if (gaps[i][n] > gaps[i][n - 1] + options.tol / 10.0) monotone = false;
    }
    if (!(gaps[i].back() <= worst)) {
      worst = gaps[i].back();
      worst_T = T_list[i];
    }
    rows.push_back({{"T", T_list[i]}, {"gaps", gaps[i]}});
  }
  r.residual = worst;
  r.witness = {{"per_T", rows}, {"worst_T", worst_T}, {"monotone", monotone}};
  r.verdict = verdict_for(worst, options.tol);
  if (r.verdict == Verdict::Pass && !monotone) {
    r.verdict = Verdict::Inconclusive;
    r.reason = "gaps grow with tau";
  }
  return r;
}

CriterionResult agreeable_check(const ControlProblem& problem, const ControlSignal& u, const GridSpec& spec,
                                const std::vector<double>& T_grid, const std::vector<double>& t_list,
                                const CriteriaOptions& options) {
  if (T_grid.size() < 3) throw ArgumentError("agreeable_check needs at least three horizons");
  if (t_list.empty()) throw ArgumentError("agreeable_check needs times t");
  std::vector<double> Ts = T_grid;
  std::sort(Ts.begin(), Ts.end());
  const double tmax = *std::max_element(t_list.begin(), t_list.end());
  if (!(tmax < Ts.front())) throw ArgumentError("agreeable_check needs every t below every T");
  CriterionResult r;
  r.criterion = "agreeable";
  r.tolerance = options.tol;
  r.horizons = Ts;
  const Vec& b = problem.initial_state();
  std::optional<Trajectory> traj;
  if (tmax > 0.0) traj = integrate_trajectory(problem, b, 0.0, u, tmax, options.integration_step);

  const std::vector<double> last(Ts.end() - 3, Ts.end());
  std::vector<std::vector<double>> deficits(t_list.size());
  for (double T : last) {
    const auto V = grid_for(problem, spec, T, options.cache);
    const double v0 = V->evaluate(0.0, b);
    for (std::size_t i = 0; i < t_list.size(); ++i) {
      const double t = t_list[i];
      if (t <= 0.0) {
        deficits[i].push_back(0.0);
        continue;
      }
      deficits[i].push_back(accumulate_cost(problem, *traj, 0.0, t) + V->evaluate(t, traj->state_at(t)) - v0);
    }
  }
  double worst = 0.0, spread = 0.0, worst_t = t_list.front();
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < t_list.size(); ++i) {
    const auto [lo, hi] = std::minmax_element(deficits[i].begin(), deficits[i].end());
    spread = std::max(spread, *hi - *lo);
    for (double d : deficits[i]) {
      if (!(std::abs(d) <= worst)) {
        worst = std::abs(d);
        worst_t = t_list[i];
      }
    }
    rows.push_back({{"t", t_list[i]}, {"deficits", deficits[i]}});
  }
  r.residual = worst;
  r.witness = {{"per_t", rows}, {"worst_t", worst_t}, {"spread", spread}, {"T_used", last}};
  r.verdict = verdict_for(worst, options.tol);
  if (r.verdict == Verdict::Pass && spread > options.tol / 2.0) {
    r.verdict = Verdict::Inconclusive;
    r.reason = "deficits oscillate across T (only liminf semantics)";
  }
  return r;
}

}  // namespace horizonlab
