#include "horizonlab/pmp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

namespace horizonlab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

nlohmann::json vec_json(const Vec& v) {
  nlohmann::json j = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v(i));
  return j;
}

/// psi' for the costate equation at (t, x, u).
Vec costate_rate(const ControlProblem& problem, double t, const Vec& x, const Vec& u, const Vec& psi,
                 int lambda) {
  Vec rate = -(problem.dynamics_jacobian(t, x, u).transpose() * psi);
  if (lambda == 1) rate += problem.cost_gradient(t, x, u);
  return rate;
}

double golden_max(const std::function<double(double)>& f, double a, double b, int iters = 50) {
  constexpr double g = 0.6180339887498949;
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = f(c), fd = f(d);
  for (int i = 0; i < iters; ++i) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = f(d);
    }
  }
  return std::max({fc, fd, f(a), f(b)});
}

}  // namespace

std::string to_string(CostateOrigin origin) {
  switch (origin) {
    case CostateOrigin::ShootingFromZero: return "shooting-from-0";
    case CostateOrigin::BackwardFromT: return "backward-from-T";
    case CostateOrigin::LimitOfFiniteHorizon: return "limit-of-finite-horizon";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Costate arcs

Vec CostateArc::at(double t) const {
  if (times.empty()) throw ArgumentError("empty costate arc");
  if (t <= times.front()) return psi.front();
  if (t >= times.back()) return psi.back();
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  const std::size_t k = static_cast<std::size_t>(it - times.begin()) - 1;
  const double s = (t - times[k]) / (times[k + 1] - times[k]);
  return (1.0 - s) * psi[k] + s * psi[k + 1];
}

double CostateArc::ode_residual(const ControlProblem& problem, const Trajectory& traj) const {
  if (traj.times.size() != times.size()) throw ArgumentError("arc and trajectory nodes differ");
  double worst = 0.0;
  for (std::size_t k = 1; k + 1 < times.size(); ++k) {
    const Vec& u = traj.step_controls[k];
    if (!(traj.step_controls[k - 1] == u)) continue;  // skip control switches
    const Vec fd = (psi[k + 1] - psi[k - 1]) / (times[k + 1] - times[k - 1]);
    const Vec rate = costate_rate(problem, times[k], traj.states[k], u, psi[k], lambda);
    worst = std::max(worst, (fd - rate).norm());
  }
  return worst;
}

nlohmann::json CostateArc::to_json() const {
  nlohmann::json ps = nlohmann::json::array();
  for (const auto& p : psi) ps.push_back(vec_json(p));
  return {{"lambda", lambda}, {"origin", to_string(origin)}, {"times", times}, {"psi", ps}};
}

CostateArc integrate_costate(const ControlProblem& problem, const Trajectory& traj, const Vec& seed, int lambda,
                             CostateDirection direction) {
  if (lambda != 0 && lambda != 1) throw ArgumentError("multiplier lambda must be 0 or 1");
  if (traj.times.size() < 2) throw ArgumentError("costate integration needs a trajectory with steps");
  if (seed.size() != problem.state_dim()) throw ArgumentError("costate seed has the wrong dimension");
  CostateArc arc;
  arc.lambda = lambda;
  arc.times = traj.times;
  arc.psi.assign(traj.times.size(), seed);
  const std::size_t n = traj.num_steps();
  auto rk4 = [&](std::size_t k, const Vec& p, bool backward) {
    const double t0 = traj.times[k], t1 = traj.times[k + 1];
    const double tm = 0.5 * (t0 + t1);
    const Vec& u = traj.step_controls[k];
    const Vec xm = traj.state_at(tm);
    const double h = backward ? t0 - t1 : t1 - t0;
    const double ta = backward ? t1 : t0, tb = backward ? t0 : t1;
    const Vec& xa = backward ? traj.states[k + 1] : traj.states[k];
    const Vec& xb = backward ? traj.states[k] : traj.states[k + 1];
    const Vec k1 = costate_rate(problem, ta, xa, u, p, lambda);
    const Vec k2 = costate_rate(problem, tm, xm, u, p + 0.5 * h * k1, lambda);
    const Vec k3 = costate_rate(problem, tm, xm, u, p + 0.5 * h * k2, lambda);
    const Vec k4 = costate_rate(problem, tb, xb, u, p + h * k3, lambda);
    return Vec(p + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
  };
  auto check = [&](const Vec& p, double t) {
    if (!p.allFinite()) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "blow-up: non-finite costate at t=%.6g", t);
      throw BlowUpError(buf, t);
    }
  };
  if (direction == CostateDirection::ForwardFromZero) {
    arc.origin = CostateOrigin::ShootingFromZero;
    for (std::size_t k = 0; k < n; ++k) {
      arc.psi[k + 1] = rk4(k, arc.psi[k], false);
      check(arc.psi[k + 1], traj.times[k + 1]);
    }
  } else {
    arc.origin = CostateOrigin::BackwardFromT;
    for (std::size_t k = n; k-- > 0;) {
      arc.psi[k] = rk4(k, arc.psi[k + 1], true);
      check(arc.psi[k], traj.times[k]);
    }
  }
  return arc;
}

void write_arc_csv(const CostateArc& arc, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ArgumentError("cannot write " + path);
  out << "t";
  const Eigen::Index m = arc.psi.empty() ? 0 : arc.psi.front().size();
  for (Eigen::Index i = 0; i < m; ++i) out << ",psi" << i;
  out << '\n';
  char buf[32];
  for (std::size_t k = 0; k < arc.times.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.17g", arc.times[k]);
    out << buf;
    for (Eigen::Index i = 0; i < m; ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", arc.psi[k](i));
      out << ',' << buf;
    }
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Maximum condition

std::vector<double> max_condition_profile(const ControlProblem& problem, const Trajectory& traj,
                                          const CostateArc& arc) {
  if (arc.times.size() != traj.times.size()) throw ArgumentError("arc and trajectory must share time nodes");
  const auto& samples = problem.control_samples();
  const auto& box = problem.control_box();
  const int m = problem.control_dim();
  std::vector<double> out(traj.times.size());
  for (std::size_t k = 0; k < traj.times.size(); ++k) {
    const double s = traj.times[k];
    const Vec& x = traj.states[k];
    const Vec& psi = arc.psi[k];
    const Vec& us = k < traj.num_steps() ? traj.step_controls[k] : traj.control.at(s);
    const double h_star = hamiltonian(problem, x, us, psi, arc.lambda, s);
    double best = h_star;
    Vec vbest = us;
    for (const auto& v : samples) {
      const double h = hamiltonian(problem, x, v, psi, arc.lambda, s);
      if (h > best) {
        best = h;
        vbest = v;
      }
    }
    if (samples.size() > 1) {
      for (int d = 0; d < m; ++d) {
        const double width = box.hi(d) - box.lo(d);
        if (!(width > 0.0)) continue;
        const double delta = width / std::max(1, box.samples - 1);
        const double a = std::max(box.lo(d), vbest(d) - delta);
        const double b = std::min(box.hi(d), vbest(d) + delta);
        Vec v = vbest;
        const double h = golden_max(
            [&](double c) {
              v(d) = c;
              return hamiltonian(problem, x, v, psi, arc.lambda, s);
            },
            a, b);
        best = std::max(best, h);
      }
    }
    out[k] = best - h_star;
  }
  return out;
}

double max_condition_residual(const ControlProblem& problem, const Trajectory& traj, const CostateArc& arc) {
  const auto p = max_condition_profile(problem, traj, arc);
  return *std::max_element(p.begin(), p.end());
}

// ---------------------------------------------------------------------------
// Superdifferential surrogates

SuperdifferentialProbe SuperdifferentialProbe::make(StateField target, const Vec& base, double r0, int K,
                                                    double eta, unsigned seed) {
  if (!(r0 > 0.0) || K < 2) throw ArgumentError("probe needs r0 > 0 and K >= 2");
  SuperdifferentialProbe p;
  p.target = std::move(target);
  p.base = base;
  p.r0 = r0;
  p.K = K;
  p.eta = eta;
  const int m = static_cast<int>(base.size());
  for (int d = 0; d < m; ++d) {
    Vec e = Vec::Zero(m);
    e(d) = 1.0;
    p.directions.push_back(e);
    p.directions.push_back(-e);
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  for (int k = 0; k < 2 * m; ++k) {
    Vec v(m);
    for (int d = 0; d < m; ++d) v(d) = normal(rng);
    if (v.norm() < 1e-12) v(0) = 1.0;
    p.directions.push_back(v / v.norm());
  }
  return p;
}

std::vector<double> SuperdifferentialProbe::radii() const {
  std::vector<double> r;
  for (int k = 0; k <= K; ++k) r.push_back(r0 * std::pow(0.5, k));
  return r;
}

double frechet_super_margin(const SuperdifferentialProbe& probe, const Vec& zeta) {
  if (zeta.size() != probe.base.size()) throw ArgumentError("zeta has the wrong dimension");
  const double h0 = probe.target(probe.base);
  if (!std::isfinite(h0)) return kInf;
  std::vector<double> rs;
  for (double r : probe.radii()) {
    if (r <= probe.r0 / 4.0 * (1.0 + 1e-12)) rs.push_back(r);
  }
  double worst = -kInf;
  for (const auto& d : probe.directions) {
    const double slope = zeta.dot(d);
    std::vector<double> q;
    for (double r : rs) {
      const double h = probe.target(probe.base + r * d);
      if (!std::isfinite(h)) return kInf;
      q.push_back((h - h0 - r * slope) / r);
    }
    double intercept = q.front();
    if (q.size() > 1) {
      const double n = static_cast<double>(q.size());
      const double mr = std::accumulate(rs.begin(), rs.end(), 0.0) / n;
      const double mq = std::accumulate(q.begin(), q.end(), 0.0) / n;
      double sxx = 0.0, sxy = 0.0;
      for (std::size_t i = 0; i < q.size(); ++i) {
        sxx += (rs[i] - mr) * (rs[i] - mr);
        sxy += (rs[i] - mr) * (q[i] - mq);
      }
      intercept = mq - (sxy / sxx) * mr;
    }
    worst = std::max(worst, intercept);
  }
  return worst;
}

bool frechet_super_test(const SuperdifferentialProbe& probe, const Vec& zeta) {
  return frechet_super_margin(probe, zeta) <= probe.eta;
}

std::vector<Vec> limiting_super_candidates(const StateField& field, const Vec& point, double rho,
                                           const LimitingOptions& options) {
  if (!(rho > 0.0)) throw ArgumentError("neighborhood radius must be positive");
  const int m = static_cast<int>(point.size());
  const int side = std::max(1, static_cast<int>(std::lround(std::pow(options.points, 1.0 / m))));
  const double step = options.grad_step > 0.0 ? options.grad_step : rho / 100.0;
  const double r0 = options.probe_r0 > 0.0 ? options.probe_r0 : rho;
  int total = 1;
  for (int d = 0; d < m; ++d) total *= side;
  std::vector<Vec> out;
  for (int k = 0; k < total; ++k) {
    Vec y = point;
    int rem = k;
    for (int d = 0; d < m; ++d) {
      const int i = rem % side;
      rem /= side;
      if (side > 1) y(d) += rho * (-1.0 + 2.0 * i / (side - 1));
    }
    Vec g(m);
    for (int d = 0; d < m; ++d) {
      Vec e = Vec::Zero(m);
      e(d) = step;
      g(d) = (field(y + e) - field(y - e)) / (2.0 * step);
    }
    if (!g.allFinite()) continue;
    const auto probe = SuperdifferentialProbe::make(field, y, r0, 6, options.eta);
    if (frechet_super_test(probe, g)) out.push_back(g);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sensitivity relations

nlohmann::json SensitivityRecord::to_json() const {
  return {{"sens1_pass", sens1_pass},
          {"sens1_margin", sens1_margin},
          {"sens2_pass_fraction", sens2_pass_fraction},
          {"sens2_worst_time", sens2_worst_time},
          {"sens2_worst_margin", sens2_worst_margin},
          {"sens2_samples", sens2_samples}};
}

SensitivityRecord sensitivity_residuals(const TimeStateField& V, const Trajectory& traj, const CostateArc& arc,
                                        const ControlProblem& problem, const SensitivityOptions& options) {
  if (arc.lambda != 1) throw ArgumentError("sensitivity relations need lambda = 1");
  SensitivityRecord rec;
  const double t0 = traj.times.front();
  const Vec& x0 = traj.states.front();
  const Vec zeta0 = -arc.initial();
  const StateField v0 = [&V, t0](const Vec& x) { return V(t0, x); };
  rec.sens1_margin = frechet_super_margin(SuperdifferentialProbe::make(v0, x0, options.probe_r0, 6, options.eta),
                                          zeta0);
  rec.sens1_pass = rec.sens1_margin <= options.eta;
  if (!rec.sens1_pass) {
    LimitingOptions lo;
    lo.probe_r0 = options.probe_r0;
    lo.eta = options.eta;
    for (const auto& c : limiting_super_candidates(v0, x0, options.rho, lo)) {
      if ((c - zeta0).norm() <= options.eta) {
        rec.sens1_pass = true;
        break;
      }
    }
  }

  const int m = problem.state_dim();
  const StateField joint = [&V, m](const Vec& z) { return V(z(0), z.tail(m)); };
  const double T = traj.end_time();
  const auto breaks = traj.control.breakpoints();
  int tested = 0, passed = 0;
  rec.sens2_worst_margin = -kInf;
  for (int k = 0; k < options.samples; ++k) {
    const double s = t0 + (k + 0.5) * (T - t0) / options.samples;
    const bool near_break = std::any_of(breaks.begin(), breaks.end(), [&](double bp) {
      return bp > t0 && std::abs(s - bp) < std::max(options.probe_r0, 2.0 * traj.step);
    });
    if (near_break) continue;
    const Vec x = traj.state_at(s);
    const Vec psi = arc.at(s);
    Vec z(m + 1), zeta(m + 1);
    z(0) = s;
    z.tail(m) = x;
    zeta(0) = hamiltonian(problem, x, traj.control.at(s), psi, 1, s);
    zeta.tail(m) = -psi;
    const double margin =
        frechet_super_margin(SuperdifferentialProbe::make(joint, z, options.probe_r0, 6, options.eta), zeta);
    ++tested;
    if (margin <= options.eta) ++passed;
    if (margin > rec.sens2_worst_margin) {
      rec.sens2_worst_margin = margin;
      rec.sens2_worst_time = s;
    }
  }
  rec.sens2_samples = tested;
  rec.sens2_pass_fraction = tested > 0 ? static_cast<double>(passed) / tested : 0.0;
  return rec;
}

// ---------------------------------------------------------------------------
// Certificates

nlohmann::json CertificateReport::to_json() const {
  nlohmann::json opt = nlohmann::json::array();
  for (std::size_t i = 0; i < optimal_residuals.size(); ++i) {
    opt.push_back({{"T", optimal_horizons[i]}, {"value", optimal_residuals[i]}});
  }
  return {{"verdict", verdict},
          {"found", found},
          {"reason", reason},
          {"lambda", lambda},
          {"psi0", vec_json(psi0)},
          {"max_condition_residual", max_condition_residual},
          {"sens1_pass", sensitivity.sens1_pass},
          {"sens2_pass_fraction", sensitivity.sens2_pass_fraction},
          {"sensitivity", sensitivity.to_json()},
          {"optimal_residuals", opt},
          {"witnessed_residual", witnessed_residual},
          {"seeds", seeds}};
}

CertificateReport verify_certificate(const ControlProblem& problem, const TimeStateField& V, const Trajectory& traj,
                                     const CostateArc& arc, const CertificateOptions& options) {
  CertificateReport rep;
  rep.lambda = arc.lambda;
  rep.psi0 = arc.initial();
  std::vector<std::string> failed;
  double witness = 0.0;
  if (arc.lambda != 1) {
    rep.verdict = "no certificate";
    rep.reason = "abnormal arc (lambda = 0) is out of scope";
    return rep;
  }

  const auto profile = max_condition_profile(problem, traj, arc);
  rep.max_condition_residual = *std::max_element(profile.begin(), profile.end());
  const auto ok_nodes =
      std::count_if(profile.begin(), profile.end(), [&](double r) { return r <= options.max_condition_tol; });
  const double mc_fraction = static_cast<double>(ok_nodes) / static_cast<double>(profile.size());
  if (mc_fraction < options.a_e_fraction) {
    failed.push_back("maximum condition");
    witness = std::max(witness, rep.max_condition_residual);
  }

  rep.sensitivity = sensitivity_residuals(V, traj, arc, problem, options.sensitivity);
  if (!rep.sensitivity.sens1_pass) {
    failed.push_back("sens1");
    witness = std::max(witness, rep.sensitivity.sens1_margin);
  }
  if (rep.sensitivity.sens2_pass_fraction < options.a_e_fraction) {
    failed.push_back("sens2");
    witness = std::max(witness, rep.sensitivity.sens2_worst_margin);
  }

  for (double T : options.optimal_horizons) {
    if (T <= traj.end_time() + 1e-12) rep.optimal_horizons.push_back(T);
  }
  if (!rep.optimal_horizons.empty()) {
    const auto inview = optimal_in_view_residual(V, problem.with_initial_state(traj.states.front()), traj.control,
                                                 rep.optimal_horizons, options.optimal_tol, options.integration_step);
    rep.optimal_residuals = inview.residuals;
    if (inview.result.verdict != Verdict::Pass) {
      failed.push_back("optimal in view");
      witness = std::max(witness, inview.result.residual);
    }
  }

  rep.found = failed.empty();
  rep.verdict = rep.found ? "certificate" : "no certificate";
  if (!rep.found) {
    rep.witnessed_residual = witness;
    rep.reason = "failed:";
    for (const auto& f : failed) rep.reason += " " + f + ";";
    rep.reason.pop_back();
  }
  return rep;
}

Certificate pmp_certificate(const ControlProblem& problem, const TimeStateField& V, const ControlSignal& u,
                            const HorizonSequence& horizons, const GridSpec& spec, const CertificateOptions& options) {
  Certificate cert;
  auto& rep = cert.report;
  const Vec& b = problem.initial_state();
  const double h = spec.effective_spacing().maxCoeff();
  const int m = problem.state_dim();

  struct Seed {
    std::size_t horizon;
    Vec value;
  };
  std::vector<Seed> seeds;
  LimitingOptions lo;
  lo.grad_step = h / 4.0;
  lo.probe_r0 = std::min(0.1, h);
  for (std::size_t n = 0; n < horizons.size(); ++n) {
    const double Tn = horizons.taus[n];
    const auto B = bolza_extend(problem, spec.with_horizon(Tn), [&V, Tn](const Vec& x) { return V(Tn, x); },
                                "V(T_n)");
    const StateField field = [&B](const Vec& x) { return B.evaluate(0.0, x); };
    nlohmann::json list = nlohmann::json::array();
    for (const auto& c : limiting_super_candidates(field, b, 2.0 * h, lo)) {
      seeds.push_back({n, Vec(-c)});
      list.push_back(vec_json(-c));
    }
    rep.seeds.push_back({{"T", Tn}, {"seeds", list}});
  }

  // single-linkage clustering with merge radius 10 h
  std::vector<std::size_t> parent(seeds.size());
  std::iota(parent.begin(), parent.end(), 0);
  std::function<std::size_t(std::size_t)> find = [&](std::size_t i) {
    return parent[i] == i ? i : parent[i] = find(parent[i]);
  };
  for (std::size_t i = 0; i < seeds.size(); ++i)
    for (std::size_t j = i + 1; j < seeds.size(); ++j)
      if ((seeds[i].value - seeds[j].value).norm() <= 10.0 * h) parent[find(i)] = find(j);
  std::vector<std::size_t> count(seeds.size(), 0);
  std::vector<Vec> sum(seeds.size(), Vec::Zero(m));
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    ++count[find(i)];
    sum[find(i)] += seeds[i].value;
  }
  std::size_t best = seeds.size();
  for (std::size_t r = 0; r < seeds.size(); ++r) {
    if (count[r] == 0) continue;
    if (best == seeds.size() || count[r] > count[best] ||
        (count[r] == count[best] && (sum[r] / count[r]).norm() < (sum[best] / count[best]).norm())) {
      best = r;
    }
  }
  auto fail = [&](const std::string& why) {
    rep.found = false;
    rep.verdict = "no certificate";
    rep.reason = why;
    return cert;
  };
  if (best == seeds.size()) return fail("no superdifferential seeds at b*");
  const std::size_t last = horizons.size() - 1;
  const std::size_t need_from = horizons.size() >= 2 ? last - 1 : last;
  for (std::size_t n = need_from; n <= last; ++n) {
    const bool present = std::any_of(seeds.begin(), seeds.end(), [&](const Seed& s) {
      return s.horizon == n && find(&s - seeds.data()) == best;
    });
    if (!present) return fail("seed clusters do not stabilize across horizons");
  }
  Vec psi0 = Vec::Zero(m);
  int members = 0;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (seeds[i].horizon == last && find(i) == best) {
      psi0 += seeds[i].value;
      ++members;
    }
  }
  psi0 /= members;
  rep.psi0 = psi0;

  try {
    cert.trajectory = integrate_trajectory(problem, b, 0.0, u, options.arc_horizon, options.integration_step);
    cert.arc = integrate_costate(problem, cert.trajectory, psi0, 1, CostateDirection::ForwardFromZero);
  } catch (const BlowUpError& e) {
    return fail(e.what());
  }
  cert.arc.origin = CostateOrigin::LimitOfFiniteHorizon;
  nlohmann::json seed_log = rep.seeds;
  rep = verify_certificate(problem, V, cert.trajectory, cert.arc, options);
  rep.seeds = seed_log;
  return cert;
}

}  // namespace horizonlab
