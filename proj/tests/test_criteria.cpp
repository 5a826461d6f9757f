#include "doctest.h"

#include "horizonlab/criteria.hpp"

#include <cmath>
#include <numbers>

using namespace horizonlab;

namespace {

const double kAllOffset = (std::numbers::ln2 - 1.0) / 2.0;
const HorizonSequence kSeq({2.0, 4.0, 8.0, 16.0});

ControlProblem l1() { return builtin_problem("linear-l1"); }

GridSpec l1_grid() { return GridSpec::uniform(scalar_vec(-3.0), scalar_vec(3.0), 0.02, 0.02, 1.0); }

ValueGridCache& cache() {
  static ValueGridCache c;
  return c;
}

CriteriaOptions opts() {
  CriteriaOptions o;
  o.cache = &cache();
  return o;
}

}  // namespace

TEST_CASE("verdict conventions") {
  CHECK(verdict_for(0.01, 0.02) == Verdict::Pass);
  CHECK(verdict_for(0.02, 0.02) == Verdict::Inconclusive);
  CHECK(verdict_for(0.03, 0.02) == Verdict::Fail);
  CHECK(verdict_for(NAN, 0.02) == Verdict::Inconclusive);
  CHECK(tail_verdict(0.05, 0.02) == Verdict::Inconclusive);
  CHECK(tail_verdict(0.2, 0.02) == Verdict::Fail);
}

TEST_CASE("check_constraint_membership") {
  const auto p = l1();
  const auto zero = ControlSignal::constant(0.0);
  const auto half = ControlSignal::constant(0.5);
  CHECK(check_constraint_membership(p, scalar_vec(1.0), 0.0, zero, AsymptoticConstraint::lebesgue(), 40.0).verdict ==
        Verdict::Pass);
  const auto riem = check_constraint_membership(p, scalar_vec(1.0), 0.0, half, AsymptoticConstraint::riemann(), 40.0);
  CHECK(riem.verdict == Verdict::Fail);
  // f0 -> 1/2 on the tail, so the tail integral is about T_max/4 * 1/2
  CHECK(riem.statistic == doctest::Approx(40.0 / 4.0 * 0.5).epsilon(1e-3));
  CHECK(check_constraint_membership(p, scalar_vec(1.0), 0.0, zero, AsymptoticConstraint::target_set({scalar_vec(0.0)}),
                                    40.0)
            .verdict == Verdict::Pass);
  CHECK(check_constraint_membership(p, scalar_vec(1.0), 0.0, half, AsymptoticConstraint::lp(1.0), 40.0).verdict ==
        Verdict::Fail);
  CHECK(check_constraint_membership(p, scalar_vec(1.0), 0.0, half, AsymptoticConstraint::bounded(), 40.0).verdict ==
        Verdict::Pass);
  CHECK_THROWS_AS(check_constraint_membership(p, scalar_vec(1.0), 10.0, zero, AsymptoticConstraint::lebesgue(), 40.0),
                  ArgumentError);
  CHECK_THROWS_AS(AsymptoticConstraint::lp(0.5), ArgumentError);
  CHECK_THROWS_AS(AsymptoticConstraint::target_set({}), ArgumentError);
  const auto round = AsymptoticConstraint::from_json(AsymptoticConstraint::target_set({scalar_vec(2.0)}).to_json());
  CHECK(round.kind() == ConstraintKind::TargetSet);
  CHECK(round.targets().front()(0) == 2.0);
}

TEST_CASE("concatenation_axiom_test") {
  const auto p = l1();
  CHECK(concatenation_axiom_test(AsymptoticConstraint::unrestricted(), p, 20));
  CHECK(concatenation_axiom_test(AsymptoticConstraint::target_set({scalar_vec(0.0)}), p, 20));
  CHECK(concatenation_axiom_test(AsymptoticConstraint::lebesgue(), p, 20));
  // head-dependent predicate: u(t) = 0 at the starting time
  const auto broken = AsymptoticConstraint::custom(
      "u(0)=0", [](const ControlProblem&, const Vec&, double t, const ControlSignal& u, double, double) {
        MembershipResult r;
        r.verdict = u.at(t).norm() == 0.0 ? Verdict::Pass : Verdict::Fail;
        return r;
      });
  CHECK_FALSE(concatenation_axiom_test(broken, p, 40));
  CHECK_THROWS_AS(concatenation_axiom_test(AsymptoticConstraint::unrestricted(), p, 5), ArgumentError);
}

TEST_CASE("optimal_in_view_residual") {
  const auto p = l1();
  const std::vector<double> Ts{1, 2, 3, 4, 5, 6};
  const TimeStateField v_all = [](double, const Vec& x) { return -x(0) + kAllOffset; };
  const TimeStateField v_inf = [](double, const Vec& x) { return -x(0); };
  const auto a = optimal_in_view_residual(v_all, p, ControlSignal::constant(0.0), Ts);
  const auto b = optimal_in_view_residual(v_inf, p, ControlSignal::constant(0.0), Ts);
  CHECK(a.result.verdict == Verdict::Pass);
  CHECK(b.result.verdict == Verdict::Pass);
  for (double r : a.residuals) CHECK(std::abs(r) <= 2e-2);
  // constant-shift invariance
  const TimeStateField shifted = [](double, const Vec& x) { return -x(0) + 1.0; };
  const auto c = optimal_in_view_residual(shifted, p, ControlSignal::constant(0.0), Ts);
  CHECK(c.result.verdict == b.result.verdict);
  for (std::size_t k = 0; k < Ts.size(); ++k) CHECK(c.residuals[k] == doctest::Approx(b.residuals[k]).epsilon(1e-9));
  // u* = 1/2 from b* = 1: x stays at 1, J = T/2
  const auto bad = optimal_in_view_residual(v_all, p, ControlSignal::constant(0.5), Ts);
  CHECK(bad.result.verdict == Verdict::Fail);
  CHECK(bad.residuals[3] >= 0.5);
  CHECK(bad.residuals[3] == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("diamond_value") {
  const auto p = l1();
  const auto fam = ControlFamily::standard(p, kSeq);
  SUBCASE("Lebesgue constraint at b = 1") {
    const auto d = diamond_value(p, scalar_vec(1.0), 0.0, AsymptoticConstraint::lebesgue(), fam, kSeq);
    CHECK(std::abs(d.estimate.limit - (-1.0)) <= 2e-2);
    CHECK(d.feasible > 0);
    CHECK(d.feasible < d.family_size);
    CHECK(std::abs(d.dpp_residual) <= 5e-2);
  }
  SUBCASE("unreachable target gives the +infinity sentinel") {
    DiamondOptions o;
    o.dpp_check = false;
    const auto d = diamond_value(p, scalar_vec(1.0), 0.0, AsymptoticConstraint::target_set({scalar_vec(10.0)}), fam,
                                 kSeq, o);
    CHECK(std::isinf(d.estimate.limit));
    CHECK(d.feasible == 0);
  }
  SUBCASE("unrestricted equals estimate_v_inf exactly, and filtering only raises the value") {
    DiamondOptions o;
    o.dpp_check = false;
    for (double b : {0.0, 1.0}) {
      const auto d = diamond_value(p, scalar_vec(b), 0.0, AsymptoticConstraint::unrestricted(), fam, kSeq, o);
      const auto v = estimate_v_inf(p, scalar_vec(b), 0.0, fam, kSeq);
      CHECK(d.estimate.limit == v.limit);
      const auto strict = diamond_value(p, scalar_vec(b), 0.0, AsymptoticConstraint::riemann(), fam, kSeq, o);
      CHECK(strict.estimate.limit >= d.estimate.limit - o.tol);
    }
  }
}

TEST_CASE("constrained_optimality_check") {
  const auto p = l1();
  const auto fam = ControlFamily::standard(p, kSeq);
  const auto classical =
      constrained_optimality_check(p, ControlSignal::constant(0.0), AsymptoticConstraint::lebesgue(), kSeq, fam);
  CHECK(classical.criterion == "classical");
  CHECK(classical.verdict == Verdict::Pass);
  const auto strong =
      constrained_optimality_check(p, ControlSignal::constant(0.0), AsymptoticConstraint::riemann(), kSeq, fam);
  CHECK(strong.criterion == "almost-strong");
  CHECK(strong.verdict == Verdict::Pass);
  const auto bad =
      constrained_optimality_check(p, ControlSignal::constant(0.5), AsymptoticConstraint::lebesgue(), kSeq, fam);
  CHECK(bad.verdict == Verdict::Fail);
  CHECK(bad.reason.find("membership") != std::string::npos);
}

TEST_CASE("weak_agreeable_check") {
  const auto p = l1();
  const HorizonSequence taus({4.0, 8.0, 16.0});
  const auto ok = weak_agreeable_check(p, ControlSignal::constant(0.0), l1_grid(), taus, {1.0, 2.0}, opts());
  CHECK(ok.verdict == Verdict::Pass);
  const auto bad = weak_agreeable_check(p, ControlSignal::constant(0.5), l1_grid(), taus, {1.0, 2.0}, opts());
  CHECK(bad.verdict == Verdict::Fail);
  CHECK(bad.witness["per_T"][1]["gaps"].back().get<double>() >= 0.4);
  const auto zero = weak_agreeable_check(p, ControlSignal::constant(0.5), l1_grid(), taus, {0.0}, opts());
  CHECK(zero.verdict == Verdict::Pass);
  CHECK(zero.residual == 0.0);
  CHECK_THROWS_AS(weak_agreeable_check(p, ControlSignal::constant(0.0), l1_grid(), taus, {5.0}, opts()), ArgumentError);
}

TEST_CASE("agreeable_check") {
  const auto p = l1();
  const std::vector<double> Tg{4.0, 8.0, 12.0, 16.0};
  const auto ok = agreeable_check(p, ControlSignal::constant(0.0), l1_grid(), Tg, {1.0, 2.0, 3.0}, opts());
  CHECK(ok.verdict == Verdict::Pass);
  const auto bad = agreeable_check(p, ControlSignal::constant(-0.5), l1_grid(), Tg, {1.0, 2.0, 3.0}, opts());
  CHECK(bad.verdict == Verdict::Fail);
  const auto zero = agreeable_check(p, ControlSignal::constant(-0.5), l1_grid(), Tg, {0.0}, opts());
  CHECK(zero.verdict == Verdict::Pass);
  CHECK(zero.residual == 0.0);
}

TEST_CASE("report serialization and table") {
  OptimalityReport rep;
  rep.problem = "linear-l1";
  rep.control = "u = 0";
  CriterionResult r;
  r.criterion = "agreeable";
  r.verdict = Verdict::Pass;
  r.residual = 1e-3;
  r.horizons = {4, 8};
  rep.entries.push_back(r);
  const auto j = rep.to_json();
  CHECK(j["criteria"][0]["verdict"] == "pass");
  const auto table = rep.summary_table();
  CHECK(table.find("agreeable") != std::string::npos);
  CHECK(table.find("4,8") != std::string::npos);
}
