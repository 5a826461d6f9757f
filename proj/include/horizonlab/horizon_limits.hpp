#pragma once

#include "horizonlab/value_solver.hpp"

#include <optional>
#include <string>
#include <vector>

namespace horizonlab {

/// Strictly increasing positive horizons tau_n.
struct HorizonSequence {
  std::vector<double> taus;

  HorizonSequence() = default;
  explicit HorizonSequence(std::vector<double> values);
  /// tau_n = t0 * ratio^n, n = 0..count-1. Defaults give {1, 2, ..., 64}.
  static HorizonSequence geometric(double t0 = 1.0, double ratio = 2.0, int count = 7);

  std::size_t size() const { return taus.size(); }
  double front() const { return taus.front(); }
  double back() const { return taus.back(); }
  /// last/first >= 8: the sequence is meant to stand in for tau -> infinity.
  bool unbounded_intent() const { return taus.back() / taus.front() >= 8.0; }
  /// The tail half used by the liminf estimator (the last ceil(n/2) entries).
  std::vector<double> tail() const;
};

enum class LimitVariant { All, LiminfSequence, InfOverControls, Diamond };

std::string to_string(LimitVariant variant);

struct LimitEstimate {
  LimitVariant variant = LimitVariant::All;
  std::vector<double> taus;
  std::vector<double> values;
  double limit = 0.0;
  double gap = 0.0;  // max |difference| among the last three values
  double tolerance = 1e-2;
  bool converged = false;
  bool extrapolated = false;
  bool liminf_bias = false;  // tail-minimum estimator may overestimate liminf
  std::optional<ControlSignal> argmin;
  std::string note;

  nlohmann::json to_json() const;
};

struct LimitOptions {
  double tolerance = 1e-2;
  ValueGridCache* cache = nullptr;  // optional, shares solved grids between calls
};

/// Builds the diagnostics (gap, convergence, extrapolation) from per-horizon
/// values. Variant All extrapolates; the liminf variants report the tail minimum.
LimitEstimate summarize_limit(LimitVariant variant, std::vector<double> taus,
                              std::vector<double> values, double tolerance);

LimitEstimate estimate_v_all(const ControlProblem& problem, const GridSpec& spec,
                             const HorizonSequence& seq, double t, const Vec& b,
                             const LimitOptions& options = {});

LimitEstimate estimate_v_infty(const ControlProblem& problem, const GridSpec& spec,
                               const HorizonSequence& seq, double t, const Vec& b,
                               const LimitOptions& options = {});

/// Finite control search space: constants at `levels` and concatenations with
/// up to `max_switches` switches at times t + k*switch_step, k >= 1, no later
/// than t + switch_window.
struct ControlFamily {
  std::vector<Vec> levels;
  double switch_step = 0.5;
  double switch_window = 0.0;
  int max_switches = 2;
  double integration_step = 1e-2;

  /// Five evenly spaced levels per control dimension across the box (corners
  /// included), window = half the smallest tail horizon.
  static ControlFamily standard(const ControlProblem& problem, const HorizonSequence& seq);
  std::vector<ControlSignal> enumerate(double t) const;
  nlohmann::json to_json() const;
};

/// Cumulative J(t, b; u, tau_n) for every horizon, from one integration.
std::vector<double> horizon_costs(const ControlProblem& problem, const Vec& b, double t,
                                  const ControlSignal& u, const HorizonSequence& seq,
                                  double integration_step);

/// inf over the family of the tail-minimum of J; records the minimizing control.
LimitEstimate estimate_v_inf(const ControlProblem& problem, const Vec& b, double t,
                             const ControlFamily& family, const HorizonSequence& seq,
                             double tolerance = 1e-2);

struct LipschitzMap {
  Vec lower;                   // region actually covered
  Vec spacing;
  std::vector<int> cells;      // cells per dimension
  std::vector<double> constants;  // per cell, dim 0 fastest
  double max = 0.0;

  std::size_t size() const { return constants.size(); }
};

/// Per cell: max over coordinate directions of |forward difference| / h.
LipschitzMap lipschitz_constant_map(const StateField& field, const Vec& lower, const Vec& upper,
                                    const Vec& spacing);
/// Uses the grid's own nodes inside the region at time t.
LipschitzMap lipschitz_constant_map(const ValueGrid& grid, const Vec& lower, const Vec& upper,
                                    double t);

/// Rows (variant, tau, value, gap) for each estimate.
void write_limit_trace_csv(const std::vector<LimitEstimate>& estimates, const std::string& path);

}  // namespace horizonlab
