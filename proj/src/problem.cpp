#include "horizonlab/problem.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

namespace horizonlab {

namespace {

constexpr double kDerivativeStep = 1e-5;

bool all_finite(const Vec& v) { return v.allFinite(); }

std::string fmt_vec(const Vec& v) {
  std::ostringstream os;
  os.precision(17);
  os << '[';
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) os << ',';
    os << v(i);
  }
  os << ']';
  return os.str();
}

Vec vec_from_json(const nlohmann::json& j) {
  if (j.is_number()) return scalar_vec(j.get<double>());
  if (!j.is_array() || j.empty() || j.size() > kMaxDim) {
    throw ArgumentError("expected a nonempty numeric array of at most 4 entries");
  }
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return v;
}

nlohmann::json vec_to_json(const Vec& v) {
  nlohmann::json j = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v(i));
  return j;
}

}  // namespace

// ---------------------------------------------------------------------------
// ControlBox

std::vector<Vec> ControlBox::lattice() const {
  if (lo.size() == 0 || lo.size() != hi.size()) {
    throw ArgumentError("control box bounds must be nonempty and of equal dimension");
  }
  if (samples < 1) throw ArgumentError("control box needs at least one sample per dimension");
  const auto dim = lo.size();
  std::vector<int> counts(static_cast<std::size_t>(dim));
  for (Eigen::Index d = 0; d < dim; ++d) {
    if (!(lo(d) <= hi(d))) throw ArgumentError("control box requires lo <= hi");
    counts[static_cast<std::size_t>(d)] = (lo(d) == hi(d) || samples == 1) ? 1 : samples;
  }
  std::vector<Vec> out;
  std::vector<int> idx(static_cast<std::size_t>(dim), 0);
  while (true) {
    Vec u(dim);
    for (Eigen::Index d = 0; d < dim; ++d) {
      const int n = counts[static_cast<std::size_t>(d)];
      const int i = idx[static_cast<std::size_t>(d)];
      u(d) = n == 1 ? lo(d) : (i == n - 1 ? hi(d) : lo(d) + (hi(d) - lo(d)) * i / (n - 1));
    }
    out.push_back(u);
    Eigen::Index d = 0;
    for (; d < dim; ++d) {
      if (++idx[static_cast<std::size_t>(d)] < counts[static_cast<std::size_t>(d)]) break;
      idx[static_cast<std::size_t>(d)] = 0;
    }
    if (d == dim) break;
  }
  return out;
}

bool ControlBox::contains(const Vec& u, double tol) const {
  if (u.size() != lo.size()) return false;
  for (Eigen::Index d = 0; d < u.size(); ++d) {
    if (u(d) < lo(d) - tol || u(d) > hi(d) + tol) return false;
  }
  return true;
}

std::string ControlBox::describe() const {
  std::ostringstream os;
  os << "box lo=" << fmt_vec(lo) << " hi=" << fmt_vec(hi) << " samples/dim=" << samples;
  return os.str();
}

// ---------------------------------------------------------------------------
// ControlProblem

ControlProblem::ControlProblem(ProblemDefinition def) : def_(std::move(def)) {
  if (def_.state_dim < 1 || def_.state_dim > 3) {
    throw ArgumentError("state dimension must be in [1, 3]");
  }
  if (!def_.dynamics || !def_.running_cost) {
    throw ArgumentError("problem '" + def_.name + "' needs dynamics and running cost");
  }
  if (def_.initial_state.size() != def_.state_dim || !all_finite(def_.initial_state)) {
    throw ArgumentError("initial state must be finite with state_dim entries");
  }
  if (def_.growth.c1 < 0.0 || def_.growth.c2 < 0.0) {
    throw ArgumentError("growth witness constants must be nonnegative");
  }
  if (def_.validation_lo.size() == 0) {
    def_.validation_lo = Vec::Constant(def_.state_dim, -10.0);
    def_.validation_hi = Vec::Constant(def_.state_dim, 10.0);
  }
  samples_ = def_.control_samples.empty() ? def_.control_box.lattice() : def_.control_samples;
  if (samples_.empty()) throw ArgumentError("control sample set must be nonempty");
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    if (samples_[i].size() != def_.control_box.lo.size()) {
      throw ArgumentError("control sample dimension does not match the control box");
    }
    if (!def_.control_box.contains(samples_[i])) {
      throw ArgumentError("control sample " + fmt_vec(samples_[i]) + " lies outside the box");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (samples_[i] == samples_[j]) {
        throw ArgumentError("duplicate control sample " + fmt_vec(samples_[i]));
      }
    }
  }
  if (const int bad = count_growth_violations(*this, 256, 20240u); bad > 0) {
    throw ArgumentError("problem '" + def_.name + "' violates its growth witness or returns " +
                        "non-finite values on " + std::to_string(bad) + " validation samples");
  }
  std::ostringstream key;
  key << def_.name << '|' << def_.params.dump() << '|' << fmt_vec(def_.initial_state) << '|';
  for (const auto& u : samples_) key << fmt_vec(u);
  key_ = key.str();
}

std::string ControlProblem::control_description() const {
  std::ostringstream os;
  os << def_.control_box.describe() << ", " << samples_.size() << " control samples";
  return os.str();
}

Mat ControlProblem::dynamics_jacobian(double t, const Vec& x, const Vec& u) const {
  if (def_.state_jacobian) return def_.state_jacobian(t, x, u);
  const int m = def_.state_dim;
  Mat jac(m, m);
  for (int j = 0; j < m; ++j) {
    Vec xp = x, xm = x;
    xp(j) += kDerivativeStep;
    xm(j) -= kDerivativeStep;
    jac.col(j) = (def_.dynamics(t, xp, u) - def_.dynamics(t, xm, u)) / (2.0 * kDerivativeStep);
  }
  return jac;
}

Vec ControlProblem::cost_gradient(double t, const Vec& x, const Vec& u) const {
  if (def_.cost_gradient) return def_.cost_gradient(t, x, u);
  const int m = def_.state_dim;
  Vec g(m);
  for (int j = 0; j < m; ++j) {
    Vec xp = x, xm = x;
    xp(j) += kDerivativeStep;
    xm(j) -= kDerivativeStep;
    g(j) = (def_.running_cost(t, xp, u) - def_.running_cost(t, xm, u)) / (2.0 * kDerivativeStep);
  }
  return g;
}

ControlProblem ControlProblem::with_initial_state(const Vec& b) const {
  ProblemDefinition def = def_;
  def.initial_state = b;
  def.control_samples = samples_;
  return ControlProblem(std::move(def));
}

ControlProblem ControlProblem::with_control_samples(std::vector<Vec> samples) const {
  ProblemDefinition def = def_;
  def.control_samples = std::move(samples);
  def.params["restricted_samples"] = true;
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& u : def.control_samples) pts.push_back(vec_to_json(u));
  def.params["samples_list"] = pts;
  return ControlProblem(std::move(def));
}

ControlProblem ControlProblem::with_running_cost(RunningCost cost, std::string suffix) const {
  ProblemDefinition def = def_;
  def.running_cost = std::move(cost);
  def.cost_gradient = nullptr;
  def.control_samples = samples_;
  def.name += "/" + suffix;
  return ControlProblem(std::move(def));
}

int count_growth_violations(const ControlProblem& problem, int samples, unsigned seed) {
  const auto& def = problem.definition();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto& controls = problem.control_samples();
  std::uniform_int_distribution<std::size_t> pick(0, controls.size() - 1);
  int bad = 0;
  for (int s = 0; s < samples; ++s) {
    Vec x(problem.state_dim());
    for (int d = 0; d < problem.state_dim(); ++d) {
      x(d) = def.validation_lo(d) + (def.validation_hi(d) - def.validation_lo(d)) * unit(rng);
    }
    const double t = 10.0 * unit(rng);
    const Vec& u = controls[pick(rng)];
    const Vec f = problem.dynamics(t, x, u);
    const double f0 = problem.running_cost(t, x, u);
    const double bound = problem.growth().c1 * x.norm() + problem.growth().c2;
    if (!all_finite(f) || !std::isfinite(f0) || f.norm() > bound * (1.0 + 1e-12) + 1e-12) ++bad;
  }
  return bad;
}

// ---------------------------------------------------------------------------
// ControlSignal

ControlSignal::ControlSignal(std::vector<double> breakpoints, std::vector<Vec> values)
    : breakpoints_(std::move(breakpoints)), values_(std::move(values)) {
  if (breakpoints_.empty() || breakpoints_.size() != values_.size()) {
    throw ArgumentError("control signal needs one value per breakpoint");
  }
  if (breakpoints_.front() != 0.0) throw ArgumentError("control breakpoints must start at 0");
  for (std::size_t i = 1; i < breakpoints_.size(); ++i) {
    if (!(breakpoints_[i] > breakpoints_[i - 1]) || !std::isfinite(breakpoints_[i])) {
      throw ArgumentError("control breakpoints must be finite and strictly increasing");
    }
  }
  for (const auto& v : values_) {
    if (v.size() != values_.front().size() || v.size() == 0 || !all_finite(v)) {
      throw ArgumentError("control values must be finite and of one dimension");
    }
  }
}

ControlSignal ControlSignal::constant(const Vec& value) { return ControlSignal({0.0}, {value}); }

const Vec& ControlSignal::at(double t) const {
  const auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), t);
  if (it == breakpoints_.begin()) return values_.front();
  return values_[static_cast<std::size_t>(it - breakpoints_.begin()) - 1];
}

std::vector<double> ControlSignal::breakpoints_in(double a, double b) const {
  std::vector<double> out;
  for (double s : breakpoints_) {
    if (s > a && s < b) out.push_back(s);
  }
  return out;
}

std::string ControlSignal::describe() const {
  std::ostringstream os;
  os.precision(6);
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (i) os << " | ";
    os << "t>=" << breakpoints_[i] << ": " << fmt_vec(values_[i]);
  }
  return os.str();
}

nlohmann::json ControlSignal::to_json() const {
  nlohmann::json vals = nlohmann::json::array();
  for (const auto& v : values_) vals.push_back(vec_to_json(v));
  return {{"breakpoints", breakpoints_}, {"values", vals}};
}

ControlSignal ControlSignal::from_json(const nlohmann::json& j) {
  std::vector<Vec> vals;
  for (const auto& v : j.at("values")) vals.push_back(vec_from_json(v));
  return ControlSignal(j.at("breakpoints").get<std::vector<double>>(), std::move(vals));
}

bool operator==(const ControlSignal& a, const ControlSignal& b) {
  return a.breakpoints_ == b.breakpoints_ && a.values_ == b.values_;
}

ControlSignal concatenate(const ControlSignal& u1, double T, const ControlSignal& u2) {
  if (!(T >= 0.0)) throw ArgumentError("concatenation time must be nonnegative");
  std::vector<double> bps;
  std::vector<Vec> vals;
  auto push = [&](double t, const Vec& v) {
    if (!vals.empty() && vals.back() == v) return;  // keep the canonical form
    bps.push_back(t);
    vals.push_back(v);
  };
  const auto b1 = u1.breakpoints();
  const auto v1 = u1.values();
  for (std::size_t i = 0; i < b1.size() && b1[i] < T; ++i) push(b1[i], v1[i]);
  push(T, u2.at(T));
  const auto b2 = u2.breakpoints();
  const auto v2 = u2.values();
  for (std::size_t i = 0; i < b2.size(); ++i) {
    if (b2[i] > T) push(b2[i], v2[i]);
  }
  return ControlSignal(std::move(bps), std::move(vals));
}

// ---------------------------------------------------------------------------
// Trajectory

std::size_t Trajectory::step_index(double t) const {
  if (t <= times.front()) return 0;
  if (t >= times.back()) return num_steps() - 1;
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  return static_cast<std::size_t>(it - times.begin()) - 1;
}

Vec Trajectory::state_at(double t) const {
  const std::size_t k = step_index(t);
  const double t0 = times[k];
  const double h = times[k + 1] - t0;
  const double s = std::clamp((t - t0) / h, 0.0, 1.0);
  if (s == 0.0) return states[k];
  if (s == 1.0) return states[k + 1];
  const double s2 = s * s;
  const double s3 = s2 * s;
  const double h00 = 2 * s3 - 3 * s2 + 1;
  const double h10 = s3 - 2 * s2 + s;
  const double h01 = -2 * s3 + 3 * s2;
  const double h11 = s3 - s2;
  return h00 * states[k] + (h10 * h) * left_rates[k] + h01 * states[k + 1] +
         (h11 * h) * right_rates[k];
}

Trajectory integrate_trajectory(const ControlProblem& problem, const Vec& b, double t0,
                                const ControlSignal& u, double T, double dt) {
  if (!(dt > 0.0)) throw ArgumentError("integration step must be positive");
  if (!(T > t0)) throw ArgumentError("integration end time must exceed the start time");
  if (b.size() != problem.state_dim() || !all_finite(b)) {
    throw ArgumentError("initial state must be finite with state_dim entries");
  }
  for (const auto& v : u.values()) {
    if (!problem.control_box().contains(v)) {
      throw ArgumentError("control value " + fmt_vec(v) + " lies outside the control box");
    }
  }

  Trajectory traj;
  traj.start_time = t0;
  traj.control = u;
  traj.step = dt;
  traj.times.push_back(t0);
  traj.states.push_back(b);

  std::vector<double> cuts{t0};
  for (double s : u.breakpoints_in(t0, T)) cuts.push_back(s);
  cuts.push_back(T);

  Vec x = b;
  for (std::size_t seg = 0; seg + 1 < cuts.size(); ++seg) {
    const double a = cuts[seg];
    const double c = cuts[seg + 1];
    const Vec& uc = u.at(a);
    const auto n = static_cast<long>(std::max(1.0, std::ceil((c - a) / dt - 1e-9)));
    const double h = (c - a) / static_cast<double>(n);
    for (long i = 0; i < n; ++i) {
      const double t = a + h * static_cast<double>(i);
      const Vec k1 = problem.dynamics(t, x, uc);
      const Vec k2 = problem.dynamics(t + 0.5 * h, x + 0.5 * h * k1, uc);
      const Vec k3 = problem.dynamics(t + 0.5 * h, x + 0.5 * h * k2, uc);
      const Vec k4 = problem.dynamics(t + h, x + h * k3, uc);
      x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      const double tn = (i + 1 == n) ? c : a + h * static_cast<double>(i + 1);
      if (!all_finite(x)) {
        std::ostringstream os;
        os << "blow-up: non-finite state at t=" << tn << " in problem '" << problem.name() << "'";
        throw BlowUpError(os.str(), tn);
      }
      traj.step_controls.push_back(uc);
      traj.left_rates.push_back(k1);
      traj.right_rates.push_back(problem.dynamics(tn, x, uc));
      traj.times.push_back(tn);
      traj.states.push_back(x);
    }
  }
  return traj;
}

double accumulate_cost(const ControlProblem& problem, const Trajectory& traj, double theta,
                       double T) {
  constexpr double kSlack = 1e-12;
  if (!(theta <= T) || theta < traj.times.front() - kSlack || T > traj.end_time() + kSlack) {
    throw ArgumentError("cost interval lies outside the trajectory span");
  }
  theta = std::max(theta, traj.times.front());
  T = std::min(T, traj.end_time());
  double total = 0.0;
  const std::size_t first = traj.step_index(theta);
  for (std::size_t k = first; k < traj.num_steps(); ++k) {
    const double a = std::max(traj.times[k], theta);
    const double b = std::min(traj.times[k + 1], T);
    if (b <= a) {
      if (traj.times[k] >= T) break;
      continue;
    }
    const Vec& uk = traj.step_controls[k];
    const double m = 0.5 * (a + b);
    const Vec xa = a == traj.times[k] ? traj.states[k] : traj.state_at(a);
    const Vec xb = b == traj.times[k + 1] ? traj.states[k + 1] : traj.state_at(b);
    const double fa = problem.running_cost(a, xa, uk);
    const double fm = problem.running_cost(m, traj.state_at(m), uk);
    const double fb = problem.running_cost(b, xb, uk);
    total += (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  }
  return total;
}

double hamiltonian(const ControlProblem& problem, const Vec& x, const Vec& u, const Vec& psi,
                   int lambda, double t) {
  if (lambda != 0 && lambda != 1) throw ArgumentError("multiplier lambda must be 0 or 1");
  if (psi.size() != problem.state_dim() || x.size() != problem.state_dim()) {
    throw ArgumentError("hamiltonian: dimension mismatch");
  }
  const Vec f = problem.dynamics(t, x, u);
  double h = psi.dot(f);
  if (lambda == 1) h -= problem.running_cost(t, x, u);
  return h;
}

// ---------------------------------------------------------------------------
// Built-in problems

double double_integrator_cost(double y1, double y2, double /*u*/) {
  return y1 * y1 + std::abs(y2);
}

namespace {

double param(const nlohmann::json& params, const char* key, double fallback) {
  if (params.contains(key)) return params.at(key).get<double>();
  return fallback;
}

ControlProblem make_linear_l1(const nlohmann::json& params) {
  ProblemDefinition def;
  def.name = "linear-l1";
  def.state_dim = 1;
  def.dynamics = [](double, const Vec& x, const Vec& u) { return scalar_vec(2.0 * u(0) - x(0)); };
  def.running_cost = [](double, const Vec& x, const Vec& u) {
    return 2.0 * u(0) + std::abs(u(0)) - x(0);
  };
  def.state_jacobian = [](double, const Vec&, const Vec&) {
    Mat j(1, 1);
    j(0, 0) = -1.0;
    return j;
  };
  def.cost_gradient = [](double, const Vec&, const Vec&) { return scalar_vec(-1.0); };
  def.control_box = {scalar_vec(-0.5), scalar_vec(0.5),
                     static_cast<int>(param(params, "samples", 21))};
  def.initial_state = scalar_vec(param(params, "b", 1.0));
  def.growth = {1.0, 1.0};
  def.params = params;
  return ControlProblem(std::move(def));
}

ControlProblem make_capital_stock(const nlohmann::json& params) {
  const double nu = param(params, "nu", 1.0);
  const double u_max = param(params, "u_max", 1.0);
  const double mu = param(params, "mu", -1.0);
  const double target = param(params, "g_target", 1.0);
  const double weight = param(params, "g_weight", 1.0);
  if (!(nu > 0.0) || !(u_max > 0.0)) throw ArgumentError("capital-stock needs nu > 0, u_max > 0");
  ProblemDefinition def;
  def.name = "capital-stock";
  def.state_dim = 1;
  def.dynamics = [nu](double, const Vec& x, const Vec& u) { return scalar_vec(-nu * x(0) + u(0)); };
  def.running_cost = [mu, target, weight](double t, const Vec& x, const Vec& u) {
    const double dx = x(0) - target;
    return std::exp(mu * t) * (dx * dx + weight * u(0) * u(0));
  };
  def.state_jacobian = [nu](double, const Vec&, const Vec&) {
    Mat j(1, 1);
    j(0, 0) = -nu;
    return j;
  };
  def.cost_gradient = [mu, target](double t, const Vec& x, const Vec&) {
    return scalar_vec(std::exp(mu * t) * 2.0 * (x(0) - target));
  };
  def.control_box = {scalar_vec(0.0), scalar_vec(u_max),
                     static_cast<int>(param(params, "samples", 21))};
  def.initial_state = scalar_vec(param(params, "x0", 0.5));
  def.growth = {nu, u_max};
  def.params = params;
  return ControlProblem(std::move(def));
}

ControlProblem make_double_integrator(const nlohmann::json& params) {
  const bool unbounded = params.value("unbounded", false);
  const double a = param(params, "a", 1.0);
  const double radius = unbounded ? param(params, "control_radius", 5.0) : a * a;
  if (!(radius > 0.0)) throw ArgumentError("double-integrator needs a positive control bound");
  ProblemDefinition def;
  def.name = "double-integrator";
  def.state_dim = 2;
  def.dynamics = [](double, const Vec& y, const Vec& u) { return make_vec({u(0), y(0)}); };
  def.running_cost = [](double, const Vec& y, const Vec& u) {
    return double_integrator_cost(y(0), y(1), u(0));
  };
  def.state_jacobian = [](double, const Vec&, const Vec&) {
    Mat j = Mat::Zero(2, 2);
    j(1, 0) = 1.0;
    return j;
  };
  def.cost_gradient = [](double, const Vec& y, const Vec&) {
    return make_vec({2.0 * y(0), y(1) > 0 ? 1.0 : (y(1) < 0 ? -1.0 : 0.0)});
  };
  def.control_box = {scalar_vec(-radius), scalar_vec(radius),
                     static_cast<int>(param(params, "samples", 21))};
  if (params.contains("initial_state")) {
    def.initial_state = vec_from_json(params.at("initial_state"));
  } else {
    def.initial_state = make_vec({0.5, 0.5});
  }
  def.growth = {1.0, radius};
  def.params = params;
  return ControlProblem(std::move(def));
}

}  // namespace

std::vector<std::string> builtin_problem_names() {
  return {"capital-stock", "double-integrator", "linear-l1"};
}

ControlProblem builtin_problem(std::string_view name, const nlohmann::json& params) {
  const nlohmann::json p = params.is_null() ? nlohmann::json::object() : params;
  if (name == "linear-l1") return make_linear_l1(p);
  if (name == "capital-stock") return make_capital_stock(p);
  if (name == "double-integrator") return make_double_integrator(p);
  std::string msg = "unknown problem '" + std::string(name) + "'; valid names:";
  for (const auto& n : builtin_problem_names()) msg += " " + n;
  throw LookupError(msg);
}

ControlProblem problem_from_json(const nlohmann::json& descriptor) {
  if (!descriptor.is_object() || !descriptor.contains("name")) {
    throw ArgumentError("problem descriptor must be an object with a 'name'");
  }
  const nlohmann::json params = descriptor.value("params", nlohmann::json::object());
  ControlProblem base = builtin_problem(descriptor.at("name").get<std::string>(), params);
  ProblemDefinition def = base.definition();
  if (descriptor.contains("initial_state")) {
    def.initial_state = vec_from_json(descriptor.at("initial_state"));
  }
  if (descriptor.contains("control_box")) {
    const auto& cb = descriptor.at("control_box");
    if (cb.contains("lo")) def.control_box.lo = vec_from_json(cb.at("lo"));
    if (cb.contains("hi")) def.control_box.hi = vec_from_json(cb.at("hi"));
    if (cb.contains("samples")) def.control_box.samples = cb.at("samples").get<int>();
    const double reach = std::max(def.control_box.lo.cwiseAbs().maxCoeff(),
                                  def.control_box.hi.cwiseAbs().maxCoeff());
    // The witness constant c2 bounds the control contribution to |f|.
    def.growth.c2 = std::max(def.growth.c2, 2.0 * reach);
    def.params["control_box"] = cb;
  }
  def.control_samples.clear();
  return ControlProblem(std::move(def));
}

nlohmann::json problem_to_json(const ControlProblem& problem) {
  const auto& box = problem.control_box();
  nlohmann::json params = problem.params();
  params.erase("control_box");
  return {{"name", problem.name()},
          {"params", params},
          {"initial_state", vec_to_json(problem.initial_state())},
          {"control_box",
           {{"lo", vec_to_json(box.lo)}, {"hi", vec_to_json(box.hi)}, {"samples", box.samples}}}};
}

}  // namespace horizonlab
