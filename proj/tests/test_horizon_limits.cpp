#include "doctest.h"

#include "horizonlab/horizon_limits.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

using namespace horizonlab;

namespace {

constexpr double kLn2 = std::numbers::ln2;
const double kAllOffset = (kLn2 - 1.0) / 2.0;  // V^all(0,b) = -b + (ln2 - 1)/2

GridSpec l1_grid(double h = 0.01) { return GridSpec::uniform(scalar_vec(-3.0), scalar_vec(3.0), h, h, 1.0); }

ValueGridCache& shared_cache() {
  static ValueGridCache cache;
  return cache;
}

LimitOptions cached() {
  LimitOptions o;
  o.cache = &shared_cache();
  return o;
}

const HorizonSequence kSeq({2.0, 4.0, 8.0, 16.0});

}  // namespace

TEST_CASE("HorizonSequence") {
  const auto g = HorizonSequence::geometric();
  CHECK(g.taus == std::vector<double>{1, 2, 4, 8, 16, 32, 64});
  CHECK(g.unbounded_intent());
  CHECK_FALSE(HorizonSequence({1.0, 2.0}).unbounded_intent());
  CHECK(kSeq.tail() == std::vector<double>{8.0, 16.0});
  CHECK(HorizonSequence({1.0, 2.0, 3.0}).tail() == std::vector<double>{2.0, 3.0});
  CHECK_THROWS_AS(HorizonSequence({2.0, 1.0}), ArgumentError);
  CHECK_THROWS_AS(HorizonSequence({0.0, 1.0}), ArgumentError);
  CHECK_THROWS_AS(HorizonSequence(std::vector<double>{}), ArgumentError);
}

TEST_CASE("summarize_limit diagnostics") {
  SUBCASE("single element") {
    const auto e = summarize_limit(LimitVariant::LiminfSequence, {4.0}, {-0.3}, 1e-2);
    CHECK(e.limit == -0.3);
    CHECK_FALSE(e.converged);
  }
  SUBCASE("alternating tail gives the minimum and no convergence") {
    const auto e = summarize_limit(LimitVariant::LiminfSequence, {1, 2, 4, 8}, {0, -1, 0, -1}, 1e-2);
    CHECK(e.limit == -1.0);
    CHECK_FALSE(e.converged);
    CHECK(e.liminf_bias);
    const auto a = summarize_limit(LimitVariant::All, {1, 2, 4, 8}, {0, -1, 0, -1}, 1e-2);
    CHECK_FALSE(a.converged);
    CHECK_FALSE(a.extrapolated);
    CHECK(a.limit == -1.0);
  }
  SUBCASE("geometric decay is extrapolated by one Richardson step") {
    // v_n = 1 + 2^-n: differences halve, limit 1
    std::vector<double> v, taus;
    for (int n = 1; n <= 10; ++n) {
      v.push_back(1.0 + std::pow(0.5, n));
      taus.push_back(n);
    }
    const auto e = summarize_limit(LimitVariant::All, taus, v, 1e-2);
    CHECK(e.converged);
    CHECK(e.extrapolated);
    CHECK(e.limit == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(e.gap == doctest::Approx(std::pow(0.5, 8) - std::pow(0.5, 10)));
  }
  SUBCASE("slow decay is not converged") {
    const auto e = summarize_limit(LimitVariant::All, {1, 2, 3, 4}, {1.0, 0.5, 0.1, -0.25}, 1e-2);
    CHECK_FALSE(e.converged);
  }
  CHECK_THROWS_AS(summarize_limit(LimitVariant::All, {1.0}, {}, 1e-2), ArgumentError);
}

TEST_CASE("estimate_v_all on linear-l1 matches the closed form") {
  const auto p = builtin_problem("linear-l1");
  for (double b : {0.0, 1.0, -1.0}) {
    const auto e = estimate_v_all(p, l1_grid(), kSeq, 0.0, scalar_vec(b), cached());
    CAPTURE(b);
    CHECK(e.values.size() == kSeq.size());
    CHECK(std::abs(e.limit - (-b + kAllOffset)) <= 2e-2);
    if (b == 0.0) {
      // V^T(0,0) does not depend on T > ln 2
      CHECK(e.converged);
      CHECK(e.gap <= e.tolerance);
    } else {
      // the last-three gap is |b|(e^-4 - e^-16) > tol, but the decay is geometric
      CHECK(e.extrapolated);
      CHECK(e.gap == doctest::Approx(std::exp(-4.0) - std::exp(-16.0)).epsilon(0.05));
    }
  }
}

TEST_CASE("zero running cost gives zero limits") {
  const auto p = builtin_problem("linear-l1").with_running_cost(
      [](double, const Vec&, const Vec&) { return 0.0; }, "zero");
  const auto e = estimate_v_all(p, l1_grid(0.05), HorizonSequence({1.0, 2.0, 4.0}), 0.0, scalar_vec(0.4));
  for (double v : e.values) CHECK(v == 0.0);
  CHECK(e.limit == 0.0);
  CHECK(e.converged);
}

TEST_CASE("estimate_v_infty") {
  const auto p = builtin_problem("linear-l1");
  const auto all = estimate_v_all(p, l1_grid(), kSeq, 0.0, scalar_vec(0.5), cached());
  const auto inf1 = estimate_v_infty(p, l1_grid(), kSeq, 0.0, scalar_vec(0.5), cached());
  CHECK(std::abs(inf1.limit - all.limit) <= 2e-2);
  // sequence invariance
  const auto inf2 = estimate_v_infty(p, l1_grid(), HorizonSequence({3.0, 9.0, 27.0}), 0.0, scalar_vec(0.5), cached());
  CHECK(std::abs(inf1.limit - inf2.limit) <= 2 * inf1.tolerance);
  const auto single = estimate_v_infty(p, l1_grid(), HorizonSequence({4.0}), 0.0, scalar_vec(0.5), cached());
  CHECK(single.limit == single.values.front());
  CHECK_THROWS_AS(estimate_v_all(p, l1_grid(), HorizonSequence({1.0, 2.0}), 1.5, scalar_vec(0.0)), ArgumentError);
}

TEST_CASE("ControlFamily enumeration") {
  const auto p = builtin_problem("linear-l1");
  const auto f = ControlFamily::standard(p, kSeq);
  REQUIRE(f.levels.size() == 5);
  CHECK(f.levels.front()(0) == -0.5);
  CHECK(f.levels[2](0) == 0.0);
  CHECK(f.switch_window == 4.0);
  const auto all = f.enumerate(0.0);
  // 5 constants, 5*4*8 one-switch, 5*4*4*C(8,2) two-switch
  CHECK(all.size() == 5 + 160 + 80 * 28);
  ControlFamily empty;
  CHECK_THROWS_AS(empty.enumerate(0.0), ArgumentError);
}

TEST_CASE("estimate_v_inf on linear-l1") {
  const auto p = builtin_problem("linear-l1");
  const auto fam = ControlFamily::standard(p, kSeq);
  SUBCASE("b = 0: arg-min is the zero control") {
    const auto e = estimate_v_inf(p, scalar_vec(0.0), 0.0, fam, kSeq);
    CHECK(std::abs(e.limit) <= 2e-2);
    REQUIRE(e.argmin.has_value());
    CHECK(*e.argmin == ControlSignal::constant(0.0));
  }
  SUBCASE("b = 1") {
    const auto e = estimate_v_inf(p, scalar_vec(1.0), 0.0, fam, kSeq);
    CHECK(std::abs(e.limit - (-1.0)) <= 2e-2);
  }
  SUBCASE("zero control alone from the origin costs exactly zero") {
    ControlFamily only;
    only.levels = {scalar_vec(0.0)};
    only.max_switches = 0;
    const auto e = estimate_v_inf(p, scalar_vec(0.0), 0.0, only, kSeq);
    for (double v : e.values) CHECK(v == 0.0);
    CHECK(e.limit == 0.0);
  }
  SUBCASE("ordering and gap constancy against V^all") {
    std::vector<double> gaps;
    for (double b : {-1.0, 0.0, 1.0}) {
      const auto inf = estimate_v_inf(p, scalar_vec(b), 0.0, fam, kSeq);
      const auto all = estimate_v_all(p, l1_grid(), kSeq, 0.0, scalar_vec(b), cached());
      CHECK(all.limit <= inf.limit + 2 * inf.tolerance);
      gaps.push_back(inf.limit - all.limit);
    }
    for (double g : gaps) CHECK(std::abs(g - (1.0 - kLn2) / 2.0) <= 2e-2);
    CHECK(std::abs(gaps.front() - gaps.back()) <= 2e-2);
  }
}

TEST_CASE("horizon_costs agree with direct integration") {
  const auto p = builtin_problem("linear-l1");
  // u = 0 from b: x = b e^{-t}, J = -b (1 - e^{-T})
  const auto costs = horizon_costs(p, scalar_vec(0.8), 0.0, ControlSignal::constant(0.0), kSeq, 1e-2);
  for (std::size_t k = 0; k < kSeq.size(); ++k) {
    CHECK(costs[k] == doctest::Approx(-0.8 * (1.0 - std::exp(-kSeq.taus[k]))).epsilon(1e-8));
  }
}

TEST_CASE("lipschitz_constant_map") {
  SUBCASE("linear field") {
    const auto m = lipschitz_constant_map([](const Vec& x) { return -x(0); }, scalar_vec(-1.0), scalar_vec(1.0),
                                          scalar_vec(0.1));
    CHECK(m.size() == 20);
    for (double k : m.constants) CHECK(k == doctest::Approx(1.0));
    CHECK(m.max == doctest::Approx(1.0));
  }
  SUBCASE("constant field") {
    const auto m = lipschitz_constant_map([](const Vec&) { return 3.0; }, make_vec({0.0, 0.0}),
                                          make_vec({1.0, 1.0}), make_vec({0.25, 0.5}));
    CHECK(m.size() == 8);
    CHECK(m.max == 0.0);
  }
  SUBCASE("computed V^8 of linear-l1") {
    const auto p = builtin_problem("linear-l1");
    const auto V = shared_cache().get(p, l1_grid().with_horizon(8.0));
    const auto m = lipschitz_constant_map(*V, scalar_vec(-2.0), scalar_vec(2.0), 0.0);
    CHECK(m.size() == 400);
    CHECK(m.max >= 0.9);
    CHECK(m.max <= 1.1);
    CHECK_THROWS_AS(lipschitz_constant_map(*V, scalar_vec(-4.0), scalar_vec(2.0), 0.0), ArgumentError);
  }
}

TEST_CASE("capital-stock discount autonomy") {
  // f0 carries e^{mu t} and the dynamics are autonomous, so V^{T+theta}(theta, y) = e^{mu theta} V^T(0, y)
  const auto p = builtin_problem("capital-stock");
  const auto spec = GridSpec::uniform(scalar_vec(0.0), scalar_vec(2.0), 0.01, 0.01, 4.0);
  const auto base = solve_finite_horizon(p, spec);
  for (double theta : {0.5, 1.0}) {
    const auto shifted = solve_finite_horizon(p, spec.with_horizon(4.0 + theta));
    for (double y : {0.2, 0.5, 0.8}) {
      const double lhs = shifted.evaluate(theta, scalar_vec(y));
      const double rhs = std::exp(-theta) * base.evaluate(0.0, scalar_vec(y));
      CHECK(std::abs(lhs - rhs) <= 1e-2 * std::abs(rhs));
    }
  }
}

TEST_CASE("trace CSV") {
  const auto e = summarize_limit(LimitVariant::All, {1.0, 2.0}, {0.5, 0.25}, 1e-2);
  const auto path = std::string("/tmp/horizonlab_trace_test.csv");
  write_limit_trace_csv({e}, path);
  std::ifstream in(path);
  std::string header, row1, row2;
  std::getline(in, header);
  std::getline(in, row1);
  std::getline(in, row2);
  CHECK(header == "variant,tau,value,gap");
  CHECK(row1 == "all,1,0.5,0");
  CHECK(row2 == "all,2,0.25,0.25");
  const auto j = e.to_json();
  CHECK(j["variant"] == "all");
  CHECK(j["argmin"].is_null());
}
