#pragma once

#include "horizonlab/horizon_limits.hpp"

#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace horizonlab {

enum class Verdict { Pass, Fail, Inconclusive };

std::string to_string(Verdict verdict);

/// residual < tol passes, residual == tol is inconclusive, larger fails;
/// non-finite residuals are inconclusive.
Verdict verdict_for(double residual, double tol);
/// Tail statistics: < tol pass, [tol, 10 tol) inconclusive, otherwise fail.
Verdict tail_verdict(double statistic, double tol);

struct MembershipResult {
  Verdict verdict = Verdict::Inconclusive;
  double statistic = 0.0;
  std::string evidence;
  nlohmann::json to_json() const;
};

class AsymptoticConstraint;
using CustomMembership =
    std::function<MembershipResult(const ControlProblem&, const Vec& b, double t, const ControlSignal& u,
                                   double T_max, double tol)>;

enum class ConstraintKind {
  Unrestricted,
  Bounded,
  LpIntegrable,
  TargetSet,
  RiemannConvergent,
  LebesgueConvergent,
  Custom
};

/// Family of admissible tails used to define the constrained value.
class AsymptoticConstraint {
 public:
  static AsymptoticConstraint unrestricted();
  static AsymptoticConstraint bounded();
  static AsymptoticConstraint lp(double p);
  static AsymptoticConstraint target_set(std::vector<Vec> points);
  static AsymptoticConstraint riemann();
  static AsymptoticConstraint lebesgue();
  /// Test doubles and user predicates; not serializable.
  static AsymptoticConstraint custom(std::string name, CustomMembership predicate);

  ConstraintKind kind() const { return kind_; }
  double p() const { return p_; }
  const std::vector<Vec>& targets() const { return targets_; }
  const CustomMembership& predicate() const { return predicate_; }
  std::string name() const;

  nlohmann::json to_json() const;
  static AsymptoticConstraint from_json(const nlohmann::json& j);

 private:
  ConstraintKind kind_ = ConstraintKind::Unrestricted;
  double p_ = 1.0;
  std::vector<Vec> targets_;
  std::string custom_name_;
  CustomMembership predicate_;
};

inline constexpr double kDefaultCriteriaTolerance = 2e-2;
inline constexpr double kMembershipStep = 1e-2;

/// Tail tests over the top quarter [3 T_max / 4, T_max]. Requires T_max >= 4t + 4.
MembershipResult check_constraint_membership(const ControlProblem& problem, const Vec& b, double t,
                                             const ControlSignal& u, const AsymptoticConstraint& c,
                                             double T_max, double tol = kDefaultCriteriaTolerance);
/// Same test on an already integrated trajectory that reaches T_max.
MembershipResult membership_from_trajectory(const ControlProblem& problem, const Trajectory& traj,
                                            const AsymptoticConstraint& c, double T_max, double tol);

/// Samples (b, t, T, u, u1) and checks that u <>_T u1 passes at (b, t) exactly
/// when u1 passes at (x(T), T).
bool concatenation_axiom_test(const AsymptoticConstraint& c, const ControlProblem& problem, int samples,
                              unsigned seed = 1123, double T_max = 40.0);

/// One row of an OptimalityReport.
struct CriterionResult {
  std::string criterion;
  Verdict verdict = Verdict::Inconclusive;
  double residual = 0.0;
  double tolerance = kDefaultCriteriaTolerance;
  std::vector<double> horizons;
  nlohmann::json witness = nlohmann::json::object();
  std::string reason;

  nlohmann::json to_json() const;
};

struct OptimalityReport {
  std::string problem;
  std::string control;
  std::vector<CriterionResult> entries;

  nlohmann::json to_json() const;
  /// Fixed-width table: criterion, verdict, residual, tol, horizons.
  std::string summary_table() const;
};

/// residual(T) = V(T, x*(T)) + J(0, b*; u*, T) - V(0, b*).
struct InViewResiduals {
  std::vector<double> horizons;
  std::vector<double> residuals;
  CriterionResult result;
};

InViewResiduals optimal_in_view_residual(const TimeStateField& V, const ControlProblem& problem,
                                         const ControlSignal& u, const std::vector<double>& T_list,
                                         double tol = kDefaultCriteriaTolerance,
                                         double integration_step = kDefaultIntegrationStep);

/// V^<> estimate: V^inf over family members that pass the membership test,
/// +infinity when none does. The DPP spot check at (t, t + 1, b) is stored in
/// dpp_residual (NaN when skipped).
struct DiamondEstimate {
  LimitEstimate estimate;
  std::size_t feasible = 0;
  std::size_t family_size = 0;
  double dpp_residual = std::numeric_limits<double>::quiet_NaN();
};

struct DiamondOptions {
  double tol = kDefaultCriteriaTolerance;
  double T_max = 0.0;  // 0: max(last horizon, 4t + 4)
  bool dpp_check = true;
};

DiamondEstimate diamond_value(const ControlProblem& problem, const Vec& b, double t,
                              const AsymptoticConstraint& c, const ControlFamily& family,
                              const HorizonSequence& horizons, const DiamondOptions& options = {});

/// Membership of u* plus |liminf_T J(0, b*; u*, T) - V^<>(0, b*)| <= tol.
CriterionResult constrained_optimality_check(const ControlProblem& problem, const ControlSignal& u,
                                             const AsymptoticConstraint& c, const HorizonSequence& horizons,
                                             const ControlFamily& family,
                                             double tol = kDefaultCriteriaTolerance);

struct CriteriaOptions {
  double tol = kDefaultCriteriaTolerance;
  ValueGridCache* cache = nullptr;
  double integration_step = kDefaultIntegrationStep;
};

/// Gap |J(0,b*;u*,T) - [V^{tau_n}(0,b*) - V^{tau_n}(T,x*(T))]| at the largest n;
/// passes when every gap is below tol and gaps do not grow with n (slack tol/10).
CriterionResult weak_agreeable_check(const ControlProblem& problem, const ControlSignal& u,
                                     const GridSpec& spec, const HorizonSequence& taus,
                                     const std::vector<double>& T_list, const CriteriaOptions& options = {});

/// deficit(t, T) = J(0,b*;u*,t) + V^T(t, x*(t)) - V^T(0,b*); passes when for every
/// t the deficits at the three largest T are below tol with spread <= tol/2.
CriterionResult agreeable_check(const ControlProblem& problem, const ControlSignal& u, const GridSpec& spec,
                                const std::vector<double>& T_grid, const std::vector<double>& t_list,
                                const CriteriaOptions& options = {});

}  // namespace horizonlab
