#pragma once

#include <Eigen/Core>

#include <functional>
#include <stdexcept>
#include <string>

namespace horizonlab {

// State, control and costate vectors never exceed four entries (three state
// coordinates plus time for joint time-state gradients), so they live inline.
inline constexpr int kMaxDim = 4;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;

/// Scalar field on states, e.g. a terminal payoff or V(t, .) at fixed t.
using StateField = std::function<double(const Vec&)>;
/// Scalar field on (time, state), e.g. a value function.
using TimeStateField = std::function<double(double, const Vec&)>;

inline Vec make_vec(std::initializer_list<double> xs) {
  Vec v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

inline Vec scalar_vec(double x) {
  Vec v(1);
  v(0) = x;
  return v;
}

class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class LookupError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Non-finite state or costate during integration.
class BlowUpError : public std::runtime_error {
 public:
  BlowUpError(const std::string& what, double time)
      : std::runtime_error(what), time_(time) {}
  double time() const noexcept { return time_; }

 private:
  double time_;
};

/// NaN in a value table or similar numerical breakdown of a solver.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A lattice search left the declared state box.
class LatticeOverflowError : public std::runtime_error {
 public:
  LatticeOverflowError(const std::string& what, int coordinate)
      : std::runtime_error(what), coordinate_(coordinate) {}
  int coordinate() const noexcept { return coordinate_; }

 private:
  int coordinate_;
};

}  // namespace horizonlab
