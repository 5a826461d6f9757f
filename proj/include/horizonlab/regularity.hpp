#pragma once

#include "horizonlab/horizon_limits.hpp"

#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace horizonlab {

struct StateBox {
  Vec lo;
  Vec hi;
  bool contains(const Vec& x, double tol = 0.0) const;
  nlohmann::json to_json() const;
};

/// x -> chart coordinates; nullopt outside the chart's domain.
using ChartMap = std::function<std::optional<Vec>(const Vec& x)>;

/// V(t, x) = R(t, w) S(z) where (w, z) are coordinates of chart(x).
struct ProductStructure {
  std::string name;
  ChartMap chart;  // empty: identity
  std::vector<int> w_indices;
  std::vector<int> z_indices;
  std::function<double(double t, const Vec& w)> R;
  StateField S;
  double t_lo = 0.0;
  double t_hi = std::numeric_limits<double>::infinity();
  std::optional<StateBox> W;  // validity boxes in chart coordinates; unset: unbounded
  std::optional<StateBox> Z;
  /// Dynamics written in chart coordinates; unset for the identity chart.
  std::optional<ControlProblem> chart_problem;
  /// P' for the min-time route; empty means every control sample.
  std::vector<Vec> restricted_controls;

  std::optional<Vec> to_chart(const Vec& x) const;
  Vec w_of(const Vec& c) const;
  Vec z_of(const Vec& c) const;
  bool in_region(double t, const Vec& c) const;
  /// Problem whose state is the chart coordinates.
  const ControlProblem& search_problem(const ControlProblem& original) const;
};

/// Identity chart with R = e^{mu t} and S = V(0, .) for the discounted
/// capital-stock model.
ProductStructure capital_stock_structure(const ControlProblem& problem, StateField S);

enum class DoubleIntegratorChart {
  Sqrt,   // (w, z) = (sqrt(y2), y1 / sqrt(y2)) on y2 > 0
  Ratio,  // (w, z) = (y1, y2 / y1^2) on y1 != 0
};

/// Chart coordinates, chart dynamics and R = w^{k+1} for the double integrator
/// with controls in [-a^2, a^2]. S may be left empty when only routes are needed.
ProductStructure double_integrator_structure(DoubleIntegratorChart chart, double a, double k = 2.0,
                                             StateField S = {});

/// x' = u with |u_i| <= 1, zero running cost.
ControlProblem unit_speed_problem(int dim = 1, int samples = 21);

// ---------------------------------------------------------------------------
// Min / max time functions

enum class TimeVariant { MinRestricted, Min, Max };
std::string to_string(TimeVariant variant);

struct TimeSearchOptions {
  double dt = 0.01;   // time step of the expanded lattice
  double h = 0.01;    // state cell used for label deduplication and z matching
  double cap = 5.0;
  std::vector<int> z_indices;      // empty: every coordinate
  std::optional<StateBox> W_set;   // on the other coordinates; unset: no restriction
  std::vector<Vec> controls;       // P'; empty: the problem's samples
  std::optional<StateBox> search_box;  // unset: derived from the growth witness
  bool prune_outside = false;  // drop labels leaving the box instead of raising
};

struct TimeQueryRecord {
  double t_start = 0.0;
  Vec y_start;
  Vec z_target;
  double time = std::numeric_limits<double>::infinity();
  bool reached = false;  // false: sentinel (+infinity)
  std::size_t labels = 0;
  nlohmann::json to_json() const;
};

struct TimeFunctionEstimate {
  TimeVariant variant = TimeVariant::Min;
  double dt = 0.0;
  double h = 0.0;
  double cap = 0.0;
  std::vector<Vec> controls;
  std::vector<TimeQueryRecord> queries;
  nlohmann::json to_json() const;
};

/// Earliest arrival at W_set x {z_target} (z within h/2) on the
/// time-expanded lattice x -> x + dt f(t, x, u).
TimeQueryRecord min_time_estimate(const ControlProblem& problem, double t_start, const Vec& y_start,
                                  const Vec& z_target, const TimeSearchOptions& options = {});
/// Latest first arrival over all lattice control paths; +infinity when some
/// path has not joined the target by the cap.
TimeQueryRecord max_time_estimate(const ControlProblem& problem, double t_start, const Vec& y_start,
                                  const Vec& z_target, const TimeSearchOptions& options = {});

struct TimeQuery {
  double t = 0.0;
  Vec y;
  Vec z;
};

/// Runs the queries in parallel. MinRestricted and Min differ only in the
/// control set supplied through options.
TimeFunctionEstimate estimate_time_function(const ControlProblem& problem, TimeVariant variant,
                                            const std::vector<TimeQuery>& queries,
                                            const TimeSearchOptions& options = {});

// ---------------------------------------------------------------------------
// Convex hull tests

/// 1D: +-1; 2D: 64 angles; 3D: Fibonacci sphere; 4D: seeded Gaussian directions.
std::vector<Vec> sphere_cover(int dim, int count = 64);

struct HullTest {
  bool inside = false;
  double margin = 0.0;  // min over directions of max_v d.v
};

HullTest interior_convexhull_test(const std::vector<Vec>& velocities);
/// Velocities f(t, x, u) over the control samples.
HullTest interior_convexhull_test(const ControlProblem& problem, double t, const Vec& x);
HullTest interior_convexhull_test(const ControlProblem& problem, double t, const Vec& x,
                                  const std::vector<Vec>& controls);

struct SeparationTest {
  bool separated = false;
  double margin = 0.0;  // best delta with d.v <= -delta for every pooled v
  Vec direction;
};

SeparationTest separation_test(const std::vector<Vec>& velocities);
SeparationTest separation_test(const ControlProblem& problem, const std::vector<std::pair<double, Vec>>& samples);

// ---------------------------------------------------------------------------
// Product structure

struct ProductValidation {
  double max_rel_error = 0.0;
  bool pass = false;
  double worst_t = 0.0;
  Vec worst_x;
  std::size_t points = 0;
  nlohmann::json to_json() const;
};

/// Tensor lattice of the given times and `per_dim` points per state coordinate.
std::vector<std::pair<double, Vec>> validation_lattice(const std::vector<double>& times, const StateBox& box,
                                                       int per_dim);

/// max |V - R S| / max(1, |V|) over the lattice; points outside the chart
/// domain are skipped, points outside the declared region are an error.
ProductValidation validate_product_structure(const TimeStateField& V, const ProductStructure& ps,
                                             const std::vector<std::pair<double, Vec>>& lattice,
                                             double tol = 2e-2);

// ---------------------------------------------------------------------------
// Region classification

enum class HypothesisRoute { None, Interior, Separation, MinTime };
std::string to_string(HypothesisRoute route);

struct RegionCell {
  Vec center;
  HypothesisRoute route = HypothesisRoute::None;
  bool hypothesis_met = false;
  bool lipschitz_observed = false;
  double local_constant = std::numeric_limits<double>::quiet_NaN();
  double refined_constant = std::numeric_limits<double>::quiet_NaN();
  double route_margin = 0.0;  // hull margin, separation margin or min-time L
  std::string chart;          // chart used by the route, empty for identity

  int code() const { return 2 * static_cast<int>(hypothesis_met) + static_cast<int>(lipschitz_observed); }
  nlohmann::json to_json() const;
};

struct ClassifierOptions {
  double t = 0.0;
  /// Charts tried in order; empty means identity coordinates with routes
  /// interior, separation, min-time. With charts: min-time in each chart,
  /// then separation of the z-velocities in each chart.
  std::vector<ProductStructure> charts;
  int sub_samples = 3;         // hypothesis sample points per cell dimension
  double probe_delta = 0.05;   // z displacement for min-time probes
  double time_cap = 1.0;
  double search_dt = 5e-3;
  double search_h = 5e-3;
  double point_radius = 0.02;  // Lipschitz neighborhood when the cell is a point
  double refine_ratio = 1.25;  // refined constant may exceed the coarse one by this factor
};

/// Classifies the cell center +- half_width (a single point when zero). V may be
/// empty, in which case only the hypothesis is checked.
RegionCell classify_cell(const ControlProblem& problem, const TimeStateField& V, const Vec& center,
                         const Vec& half_width, const ClassifierOptions& options = {});

struct RegionMap {
  StateBox region;
  std::vector<int> cells;  // per dimension, dim 0 fastest
  std::vector<RegionCell> entries;

  /// Columns: center coordinates, route, hypothesis_met, lipschitz_observed,
  /// local_constant, code.
  void write_csv(const std::string& path) const;
  nlohmann::json summary() const;
};

RegionMap lipschitz_region_classifier(const ControlProblem& problem, const TimeStateField& V,
                                      const StateBox& region, const std::vector<int>& resolution,
                                      const ClassifierOptions& options = {});

// ---------------------------------------------------------------------------
// Double-integrator homogeneity

struct HomogeneityPair {
  double nu = 1.0;
  Vec y;
  double lhs = 0.0;           // scaled quantity at (nu y1, nu^2 y2)
  double rhs = 0.0;           // nu^{k+1} times the base quantity
  double rel_error = 0.0;
  double stated_rel_error = 0.0;  // against nu^{k-1} times the base quantity
  nlohmann::json to_json() const;
};

struct HomogeneityOptions {
  double h = 0.05;
  double dt = 0.02;
  double horizon = 1.0;
  StateBox box{make_vec({-2.0, -2.0}), make_vec({2.0, 2.0})};
  StateBox query_box{make_vec({-0.8, -0.8}), make_vec({0.8, 0.8})};
  std::vector<double> nus{0.5, 2.0};
  int pairs = 10;
  double tol = 2e-2;
  unsigned seed = 5;
};

struct HomogeneityReport {
  double k = 2.0;
  double exponent = 3.0;        // re-derived: k + 1 with horizon nu T
  double stated_exponent = 1.0;  // stated: k - 1
  bool cost_homogeneous = false;
  std::vector<HomogeneityPair> value_pairs;
  std::vector<HomogeneityPair> trajectory_pairs;
  double max_rel_error = 0.0;
  double stated_max_rel_error = 0.0;
  bool pass = false;
  std::string note;
  nlohmann::json to_json() const;
};

/// Value pairs compare V^{nu T} on the diag(nu, nu^2)-scaled grid (dt scaled by nu)
/// with nu^{k+1} V^T; trajectory pairs compare J(0, (nu y1, nu^2 y2); u(./nu), nu T)
/// with nu^{k+1} J(0, y; u, T).
HomogeneityReport example2_homogeneity(const ControlProblem& problem, double k,
                                       const HomogeneityOptions& options = {});

}  // namespace horizonlab
