#pragma once

#include "horizonlab/problem.hpp"

#include <atomic>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace horizonlab {

enum class BoundaryPolicy { ClampExtrapolate, LargePenalty };

std::string to_string(BoundaryPolicy policy);
BoundaryPolicy boundary_policy_from_string(const std::string& tag);

/// Euler: dt*f0(t,x,u) + V(x + dt*f). Heun: trapezoidal cost along a Heun
/// foot point, second order in time.
enum class TimeScheme { Euler, Heun };

std::string to_string(TimeScheme scheme);
TimeScheme time_scheme_from_string(const std::string& tag);

/// Space-time lattice for backward semi-Lagrangian dynamic programming.
struct GridSpec {
  Vec lower;
  Vec upper;
  Vec spacing;  // requested h per dimension; the effective spacing divides the box evenly
  double dt = 0.01;
  double horizon = 1.0;
  BoundaryPolicy boundary = BoundaryPolicy::ClampExtrapolate;
  double penalty = 1e6;  // value outside the box under LargePenalty
  TimeScheme scheme = TimeScheme::Euler;

  static GridSpec uniform(const Vec& lower, const Vec& upper, double h, double dt,
                          double horizon);

  void validate() const;
  int dim() const { return static_cast<int>(lower.size()); }
  std::vector<int> node_counts() const;
  Vec effective_spacing() const;
  int time_steps() const;
  double effective_dt() const { return horizon / time_steps(); }
  GridSpec with_horizon(double T) const;
  GridSpec refined() const;  // h and dt halved
  std::string key() const;
  nlohmann::json to_json() const;
  static GridSpec from_json(const nlohmann::json& j);
};

/// Tabulated V(t_i, x_j). Immutable once built.
class ValueGrid {
 public:
  ValueGrid(GridSpec spec, std::vector<double> values, std::string terminal_tag,
            long out_of_box_queries = 0);

  const GridSpec& spec() const { return spec_; }
  const std::string& terminal_tag() const { return terminal_tag_; }
  long out_of_box_queries() const { return out_of_box_; }
  int num_layers() const { return static_cast<int>(times_.size()); }
  std::size_t nodes_per_layer() const { return nodes_; }
  const std::vector<double>& times() const { return times_; }
  const std::vector<int>& node_counts() const { return counts_; }
  const Vec& spacing() const { return h_; }

  double node_value(int layer, std::size_t node) const { return values_[layer * nodes_ + node]; }
  Vec node_position(std::size_t node) const;
  std::size_t node_index(const std::vector<int>& multi) const;

  /// Multilinear in space, linear in time; the boundary policy handles
  /// points outside the box.
  double evaluate(double t, const Vec& x) const;
  double evaluate_layer(int layer, const Vec& x) const;

  const std::vector<double>& raw_values() const { return values_; }

 private:
  GridSpec spec_;
  std::vector<int> counts_;
  Vec h_;
  std::size_t nodes_ = 0;
  std::vector<double> times_;
  std::vector<double> values_;
  std::string terminal_tag_;
  long out_of_box_ = 0;
};

/// V^T with zero terminal payoff.
ValueGrid solve_finite_horizon(const ControlProblem& problem, const GridSpec& spec);

/// Same recursion with V(T, x) = terminal(x).
ValueGrid bolza_extend(const ControlProblem& problem, const GridSpec& spec,
                       const StateField& terminal, const std::string& terminal_tag = "terminal");

double evaluate(const ValueGrid& grid, double t, const Vec& x);

/// Wraps a grid (kept alive by the shared pointer) as a time-state field.
TimeStateField as_field(std::shared_ptr<const ValueGrid> grid);

struct DppOptions {
  double integration_step = kDefaultIntegrationStep;
};

/// V(t,b) - min over {constants, one switch at the midpoint} of
/// [J(t,b;u,tau) + V(tau, x(tau))].
double dpp_residual(const TimeStateField& value, const ControlProblem& problem, double t,
                    double tau, const Vec& b, const DppOptions& options = {});
double dpp_residual(const ValueGrid& grid, const ControlProblem& problem, double t, double tau,
                    const Vec& b, const DppOptions& options = {});

/// Shared cache of solved grids keyed by (problem, spec). Thread-safe.
class ValueGridCache {
 public:
  std::shared_ptr<const ValueGrid> get(const ControlProblem& problem, const GridSpec& spec);
  std::size_t size() const;

 private:
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<const ValueGrid>> grids_;
};

// --- export / import --------------------------------------------------------

/// CSV rows (t, x..., V) with 17 significant digits.
void write_value_csv(const ValueGrid& grid, const std::string& csv_path);
/// JSON sidecar with the GridSpec and terminal tag.
void write_value_sidecar(const ValueGrid& grid, const std::string& json_path);
ValueGrid read_value_csv(const std::string& csv_path, const std::string& json_path);

void write_value_binary(const ValueGrid& grid, const std::string& path);
ValueGrid read_value_binary(const std::string& path, const std::string& json_path);

/// Worker count from HORIZONLAB_THREADS (default 1).
int configured_threads();

}  // namespace horizonlab
