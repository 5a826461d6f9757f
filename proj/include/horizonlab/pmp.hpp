#pragma once

#include "horizonlab/criteria.hpp"

#include <string>
#include <vector>

namespace horizonlab {

enum class CostateOrigin { ShootingFromZero, BackwardFromT, LimitOfFiniteHorizon };
enum class CostateDirection { ForwardFromZero, BackwardFromT };

std::string to_string(CostateOrigin origin);

/// psi on the trajectory's time nodes, with multiplier lambda in {0, 1}.
struct CostateArc {
  std::vector<double> times;
  std::vector<Vec> psi;
  int lambda = 1;
  CostateOrigin origin = CostateOrigin::ShootingFromZero;

  /// Linear interpolation between nodes (clamped to the span).
  Vec at(double t) const;
  const Vec& initial() const { return psi.front(); }
  const Vec& terminal() const { return psi.back(); }
  /// max over interior nodes of |central difference of psi + dH/dx|.
  double ode_residual(const ControlProblem& problem, const Trajectory& traj) const;
  nlohmann::json to_json() const;
};

/// RK4 on -psi' = psi . df/dx - lambda df0/dx along the stored trajectory.
/// Forward treats `seed` as psi at the start, backward as psi at the end.
CostateArc integrate_costate(const ControlProblem& problem, const Trajectory& traj, const Vec& seed, int lambda,
                             CostateDirection direction = CostateDirection::ForwardFromZero);

/// CSV rows (t, psi0, psi1, ...).
void write_arc_csv(const CostateArc& arc, const std::string& path);

/// Per-node sup_v H(x*, v, psi) - H(x*, u*, psi); the sup runs over the
/// control samples refined by golden-section search along each control axis.
std::vector<double> max_condition_profile(const ControlProblem& problem, const Trajectory& traj,
                                          const CostateArc& arc);
double max_condition_residual(const ControlProblem& problem, const Trajectory& traj, const CostateArc& arc);

/// Finite-sample surrogate for the Frechet superdifferential at `base`.
struct SuperdifferentialProbe {
  StateField target;
  Vec base;
  std::vector<Vec> directions;
  double r0 = 0.1;
  int K = 6;
  double eta = 1e-3;

  /// Directions: +-axes plus 2m random unit vectors.
  static SuperdifferentialProbe make(StateField target, const Vec& base, double r0 = 0.1, int K = 6,
                                     double eta = 1e-3, unsigned seed = 7);
  std::vector<double> radii() const;  // r0 2^-k, k = 0..K
};

/// Largest estimated limsup over the probe directions: the quotients
/// [h(x + r d) - h(x) - r zeta.d] / r for r <= r0/4 are fitted linearly in r
/// and the intercept at r = 0 is taken.
double frechet_super_margin(const SuperdifferentialProbe& probe, const Vec& zeta);
/// Accepts iff frechet_super_margin <= eta.
bool frechet_super_test(const SuperdifferentialProbe& probe, const Vec& zeta);

struct LimitingOptions {
  int points = 27;
  double grad_step = 0.0;  // 0: rho / 100
  double probe_r0 = 0.0;   // 0: rho
  double eta = 1e-3;
};

/// Central-difference gradients at lattice points of the rho-ball that pass
/// the Frechet test at their own base point.
std::vector<Vec> limiting_super_candidates(const StateField& field, const Vec& point, double rho,
                                           const LimitingOptions& options = {});

struct SensitivityOptions {
  double eta = 1e-3;
  double probe_r0 = 0.05;
  double rho = 0.05;  // neighborhood for the limiting fallback of sens1
  int samples = 200;  // sens2 sample times
};

struct SensitivityRecord {
  bool sens1_pass = false;
  double sens1_margin = 0.0;
  double sens2_pass_fraction = 0.0;
  double sens2_worst_time = 0.0;
  double sens2_worst_margin = 0.0;
  int sens2_samples = 0;
  nlohmann::json to_json() const;
};

SensitivityRecord sensitivity_residuals(const TimeStateField& V, const Trajectory& traj, const CostateArc& arc,
                                        const ControlProblem& problem, const SensitivityOptions& options = {});

struct CertificateOptions {
  double arc_horizon = 10.0;
  double integration_step = kDefaultIntegrationStep;
  std::vector<double> optimal_horizons{1, 2, 3, 4, 5, 6};
  double max_condition_tol = 1e-3;
  double optimal_tol = kDefaultCriteriaTolerance;
  double a_e_fraction = 0.98;
  SensitivityOptions sensitivity;
};

struct CertificateReport {
  bool found = false;
  std::string verdict;  // "certificate" or "no certificate"
  std::string reason;
  int lambda = 1;
  Vec psi0;
  double max_condition_residual = 0.0;
  SensitivityRecord sensitivity;
  std::vector<double> optimal_horizons;
  std::vector<double> optimal_residuals;
  double witnessed_residual = 0.0;  // largest failing residual when no certificate
  nlohmann::json seeds = nlohmann::json::array();

  nlohmann::json to_json() const;
};

struct Certificate {
  CostateArc arc;
  Trajectory trajectory;
  CertificateReport report;
};

/// Sufficiency mode: checks the relations for a given arc and then optimality
/// in view of V.
CertificateReport verify_certificate(const ControlProblem& problem, const TimeStateField& V,
                                     const Trajectory& traj, const CostateArc& arc,
                                     const CertificateOptions& options = {});

/// Necessity mode: Bolza problems with terminal V(T_n, .) give costate seeds
/// -d+V at b*; the stable seed cluster is integrated forward and verified.
Certificate pmp_certificate(const ControlProblem& problem, const TimeStateField& V, const ControlSignal& u,
                            const HorizonSequence& horizons, const GridSpec& spec,
                            const CertificateOptions& options = {});

}  // namespace horizonlab
