#pragma once

#include "horizonlab/types.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace horizonlab {

using Dynamics = std::function<Vec(double t, const Vec& x, const Vec& u)>;
using RunningCost = std::function<double(double t, const Vec& x, const Vec& u)>;
using StateJacobian = std::function<Mat(double t, const Vec& x, const Vec& u)>;
using CostGradient = std::function<Vec(double t, const Vec& x, const Vec& u)>;

/// Axis-aligned control box sampled on a uniform lattice.
struct ControlBox {
  Vec lo;
  Vec hi;
  int samples = 21;  // lattice points per control dimension

  std::vector<Vec> lattice() const;
  bool contains(const Vec& u, double tol = 1e-12) const;
  std::string describe() const;
};

struct GrowthWitness {
  double c1 = 0.0;
  double c2 = 0.0;
};

/// Everything needed to build a ControlProblem. Optional pieces
/// (explicit control samples, analytic derivatives) may be left empty.
struct ProblemDefinition {
  std::string name;
  int state_dim = 1;
  Dynamics dynamics;
  RunningCost running_cost;
  ControlBox control_box;
  std::vector<Vec> control_samples;  // empty: use control_box.lattice()
  Vec initial_state;
  GrowthWitness growth;
  Vec validation_lo;  // state box used to validate the growth witness;
  Vec validation_hi;  // defaults to [-10, 10]^m
  StateJacobian state_jacobian;  // d f / d x, optional
  CostGradient cost_gradient;    // d f0 / d x, optional
  nlohmann::json params = nlohmann::json::object();
};

/// Immutable control problem: dynamics f, running cost f0, sampled control
/// set P and initial state b*.
class ControlProblem {
 public:
  explicit ControlProblem(ProblemDefinition def);

  const std::string& name() const { return def_.name; }
  int state_dim() const { return def_.state_dim; }
  int control_dim() const { return static_cast<int>(def_.control_box.lo.size()); }
  const ControlBox& control_box() const { return def_.control_box; }
  const std::vector<Vec>& control_samples() const { return samples_; }
  std::string control_description() const;
  const Vec& initial_state() const { return def_.initial_state; }
  const GrowthWitness& growth() const { return def_.growth; }
  const nlohmann::json& params() const { return def_.params; }
  const ProblemDefinition& definition() const { return def_; }

  Vec dynamics(double t, const Vec& x, const Vec& u) const { return def_.dynamics(t, x, u); }
  double running_cost(double t, const Vec& x, const Vec& u) const {
    return def_.running_cost(t, x, u);
  }

  /// Analytic when supplied, otherwise central differences with step 1e-5.
  Mat dynamics_jacobian(double t, const Vec& x, const Vec& u) const;
  Vec cost_gradient(double t, const Vec& x, const Vec& u) const;
  bool has_analytic_derivatives() const {
    return static_cast<bool>(def_.state_jacobian) && static_cast<bool>(def_.cost_gradient);
  }

  /// Identifies the problem for caching: name plus parameters plus control
  /// set and initial state.
  const std::string& cache_key() const { return key_; }

  ControlProblem with_initial_state(const Vec& b) const;
  ControlProblem with_control_samples(std::vector<Vec> samples) const;
  ControlProblem with_running_cost(RunningCost cost, std::string suffix) const;

 private:
  ProblemDefinition def_;
  std::vector<Vec> samples_;
  std::string key_;
};

/// Checks ||f(t,x,u)|| <= c1 ||x|| + c2 and finiteness of f and f0 on random
/// samples of the validation box. Returns the number of violations.
int count_growth_violations(const ControlProblem& problem, int samples, unsigned seed);

/// Piecewise-constant control: value i holds on [breakpoints[i], breakpoints[i+1]),
/// the last value extends to +infinity.
class ControlSignal {
 public:
  ControlSignal(std::vector<double> breakpoints, std::vector<Vec> values);
  static ControlSignal constant(const Vec& value);
  static ControlSignal constant(double value) { return constant(scalar_vec(value)); }

  const Vec& at(double t) const;
  std::span<const double> breakpoints() const { return breakpoints_; }
  std::span<const Vec> values() const { return values_; }
  /// Breakpoints strictly inside (a, b).
  std::vector<double> breakpoints_in(double a, double b) const;
  bool is_constant() const { return values_.size() == 1; }
  std::string describe() const;
  nlohmann::json to_json() const;
  static ControlSignal from_json(const nlohmann::json& j);

  friend bool operator==(const ControlSignal& a, const ControlSignal& b);

 private:
  std::vector<double> breakpoints_;
  std::vector<Vec> values_;
};

/// u1 on [0, T), u2 (at the same absolute time) on [T, infinity).
ControlSignal concatenate(const ControlSignal& u1, double T, const ControlSignal& u2);

/// Integrated motion. Each step [times[k], times[k+1]] uses the constant
/// control step_controls[k]; the rates at both ends of the step are kept so
/// the state can be evaluated between nodes by cubic Hermite interpolation.
struct Trajectory {
  double start_time = 0.0;
  std::vector<double> times;
  std::vector<Vec> states;
  std::vector<Vec> step_controls;
  std::vector<Vec> left_rates;
  std::vector<Vec> right_rates;
  ControlSignal control = ControlSignal::constant(0.0);
  double step = 0.0;

  double end_time() const { return times.back(); }
  std::size_t num_steps() const { return times.size() - 1; }
  /// Index k of the step containing t (clamped to the span).
  std::size_t step_index(double t) const;
  Vec state_at(double t) const;
  const Vec& final_state() const { return states.back(); }
};

inline constexpr double kDefaultIntegrationStep = 1e-3;

/// Classical RK4 on [t0, T], splitting at control breakpoints.
Trajectory integrate_trajectory(const ControlProblem& problem, const Vec& b, double t0,
                                const ControlSignal& u, double T,
                                double dt = kDefaultIntegrationStep);

/// J(theta, x(theta); u, T): composite Simpson on each integration step.
double accumulate_cost(const ControlProblem& problem, const Trajectory& traj, double theta,
                       double T);

/// H = psi . f - lambda f0 with lambda in {0, 1}.
double hamiltonian(const ControlProblem& problem, const Vec& x, const Vec& u, const Vec& psi,
                   int lambda, double t);

std::vector<std::string> builtin_problem_names();

/// Built-in problems: "capital-stock", "double-integrator", "linear-l1".
/// `params` overrides defaults (see README for keys).
ControlProblem builtin_problem(std::string_view name,
                               const nlohmann::json& params = nlohmann::json::object());

/// Loads {name, params, initial_state, control_box:{lo,hi,samples}}.
ControlProblem problem_from_json(const nlohmann::json& descriptor);
nlohmann::json problem_to_json(const ControlProblem& problem);

/// Double-integrator running cost g(y1, y2, u) = y1^2 + |y2|, homogeneous of
/// degree 2 under (y1, y2) -> (nu y1, nu^2 y2).
double double_integrator_cost(double y1, double y2, double u);

}  // namespace horizonlab
