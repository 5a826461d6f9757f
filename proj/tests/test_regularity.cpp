#include "doctest.h"

#include "horizonlab/regularity.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

using namespace horizonlab;

namespace {

TimeSearchOptions unit_opts(double cap = 2.0) {
  TimeSearchOptions o;
  o.cap = cap;
  return o;
}

}  // namespace

TEST_CASE("min_time_estimate on the unit-speed system") {
  const auto p = unit_speed_problem();
  const auto r = min_time_estimate(p, 0.0, scalar_vec(0.0), scalar_vec(0.5), unit_opts());
  CHECK(r.reached);
  CHECK(std::abs(r.time - 0.5) <= 2 * 0.01);
  const auto zero = min_time_estimate(p, 0.0, scalar_vec(0.3), scalar_vec(0.3), unit_opts());
  CHECK(zero.time == 0.0);
  const auto far = min_time_estimate(p, 0.0, scalar_vec(0.0), scalar_vec(5.0), unit_opts(1.0));
  CHECK_FALSE(far.reached);
  CHECK(std::isinf(far.time));

  SUBCASE("random queries match |z - z'| and the Q ordering holds") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    TimeSearchOptions restricted = unit_opts(3.0);
    restricted.controls = {scalar_vec(-1.0), scalar_vec(1.0)};
    const auto singleton = p.with_control_samples({scalar_vec(1.0)});
    for (int i = 0; i < 50; ++i) {
      const double a = d(rng), b = d(rng);
      const auto q = min_time_estimate(p, 0.0, scalar_vec(a), scalar_vec(b), unit_opts(3.0));
      CHECK(std::abs(q.time - std::abs(a - b)) <= 2 * 0.01);
      const auto qr = min_time_estimate(p, 0.0, scalar_vec(a), scalar_vec(b), restricted);
      CHECK(q.time <= qr.time + 2 * 0.01);
      if (b > a) {
        const auto qmax = max_time_estimate(singleton, 0.0, scalar_vec(a), scalar_vec(b), unit_opts(3.0));
        CHECK(q.time <= qmax.time + 2 * 0.01);
      }
    }
  }
}

TEST_CASE("max_time_estimate") {
  const auto p = unit_speed_problem();
  const auto single = p.with_control_samples({scalar_vec(1.0)});
  const auto mx = max_time_estimate(single, 0.0, scalar_vec(0.0), scalar_vec(0.5), unit_opts());
  const auto mn = min_time_estimate(single, 0.0, scalar_vec(0.0), scalar_vec(0.5), unit_opts());
  CHECK(mx.reached);
  CHECK(std::abs(mx.time - 0.5) <= 2 * 0.01);
  CHECK(mx.time == doctest::Approx(mn.time));
  const auto stall = max_time_estimate(p.with_control_samples({scalar_vec(0.0), scalar_vec(1.0)}), 0.0,
                                       scalar_vec(0.0), scalar_vec(0.5), unit_opts());
  CHECK_FALSE(stall.reached);
  CHECK(std::isinf(stall.time));

  SUBCASE("linear-l1 from 2 to 1.5") {
    const auto l1 = builtin_problem("linear-l1");
    TimeSearchOptions o;
    o.cap = 3.0;
    const auto hi = max_time_estimate(l1, 0.0, scalar_vec(2.0), scalar_vec(1.5), o);
    const auto lo = min_time_estimate(l1, 0.0, scalar_vec(2.0), scalar_vec(1.5), o);
    CHECK(hi.reached);
    CHECK(hi.time <= o.cap);
    CHECK(lo.time <= hi.time);
    // slowest control u = 1/2: x - 1 = e^{-t}
    CHECK(std::abs(hi.time - std::log(2.0)) <= 2 * o.dt);
    // fastest control u = -1/2: x + 1 = 3 e^{-t}
    CHECK(std::abs(lo.time - std::log(3.0 / 2.5)) <= 2 * o.dt);
  }
}

TEST_CASE("time search errors and batch estimates") {
  const auto p = unit_speed_problem();
  TimeSearchOptions o = unit_opts();
  o.search_box = StateBox{scalar_vec(-0.1), scalar_vec(0.1)};
  try {
    min_time_estimate(p, 0.0, scalar_vec(0.0), scalar_vec(0.5), o);
    FAIL("expected overflow");
  } catch (const LatticeOverflowError& e) {
    CHECK(e.coordinate() == 0);
    CHECK(std::string(e.what()).find("coordinate 0") != std::string::npos);
  }
  o.search_box.reset();
  o.cap = 0.0;
  CHECK_THROWS_AS(min_time_estimate(p, 0.0, scalar_vec(0.0), scalar_vec(0.5), o), ArgumentError);

  const auto est = estimate_time_function(p, TimeVariant::Min,
                                          {{0.0, scalar_vec(0.0), scalar_vec(0.2)}, {0.0, scalar_vec(0.0), scalar_vec(-0.4)}},
                                          unit_opts());
  REQUIRE(est.queries.size() == 2);
  CHECK(std::abs(est.queries[1].time - 0.4) <= 0.02);
  CHECK(est.to_json()["variant"] == "min");
}

TEST_CASE("double-integrator sqrt chart min time") {
  const auto ps = double_integrator_structure(DoubleIntegratorChart::Sqrt, 1.0);
  TimeSearchOptions o;
  o.dt = 1e-3;
  o.h = 1e-3;
  o.cap = 1.0;
  o.z_indices = {1};
  o.controls = ps.restricted_controls;
  o.search_box = StateBox{make_vec({0.5, -1.0}), make_vec({1.5, 1.0})};
  const auto r = min_time_estimate(*ps.chart_problem, 0.0, make_vec({1.0, 0.0}), scalar_vec(0.1), o);
  CHECK(r.reached);
  CHECK(r.time <= 4.0 * 1.0 * 0.1 + 2 * o.dt);
  const auto c = ps.to_chart(make_vec({0.5, 0.25}));
  REQUIRE(c);
  CHECK((*c)(0) == doctest::Approx(0.5));
  CHECK((*c)(1) == doctest::Approx(1.0));
  CHECK_FALSE(ps.to_chart(make_vec({0.5, -0.25})));
}

TEST_CASE("interior and separation tests") {
  const auto cap = builtin_problem("capital-stock");
  const auto in = interior_convexhull_test(cap, 0.0, scalar_vec(0.5));
  CHECK(in.inside);
  CHECK(in.margin == doctest::Approx(0.5));
  CHECK_FALSE(interior_convexhull_test(cap, 0.0, scalar_vec(2.0)).inside);
  CHECK_FALSE(interior_convexhull_test({make_vec({1.0, 0.0}), make_vec({-1.0, 0.0})}).inside);
  CHECK_THROWS_AS(interior_convexhull_test(cap, 0.0, scalar_vec(0.5), {}), ArgumentError);

  std::vector<std::pair<double, Vec>> region;
  for (int i = 0; i <= 10; ++i) region.emplace_back(0.0, scalar_vec(1.5 + 0.15 * i));
  const auto sep = separation_test(cap, region);
  CHECK(sep.separated);
  CHECK(sep.margin >= 0.5 - 1e-12);
  region.emplace_back(0.0, scalar_vec(0.5));
  CHECK_FALSE(separation_test(cap, region).separated);
  const auto constant = separation_test({make_vec({0.0, -3.0})});
  CHECK(constant.separated);
  CHECK(constant.margin == doctest::Approx(3.0));

  SUBCASE("interior excludes separation at a single point") {
    for (double x : {0.1, 0.5, 0.9, 1.5, 2.5}) {
      const bool inside = interior_convexhull_test(cap, 0.0, scalar_vec(x)).inside;
      const bool separated = separation_test(cap, {{0.0, scalar_vec(x)}}).separated;
      CHECK_FALSE((inside && separated));
    }
  }
  CHECK(sphere_cover(2).size() == 64);
  CHECK(sphere_cover(3).size() == 64);
  for (const auto& d : sphere_cover(3)) CHECK(d.norm() == doctest::Approx(1.0));
}

TEST_CASE("validate_product_structure") {
  const auto cap = builtin_problem("capital-stock");
  const auto grid = solve_finite_horizon(cap, GridSpec::uniform(scalar_vec(-0.5), scalar_vec(3.5), 0.01, 0.01, 8.0));
  const TimeStateField V = [&grid](double t, const Vec& x) { return grid.evaluate(t, x); };
  const StateField S = [&grid](const Vec& x) { return grid.evaluate(0.0, x); };
  // autonomy of the discount: V^{T}(theta, y) = e^{-theta} V^{T - theta}(0, y); compare on
  // a long horizon where the truncation barely matters
  const auto lattice = validation_lattice({0.0, 0.5, 1.0}, StateBox{scalar_vec(0.2), scalar_vec(0.8)}, 7);
  CHECK(lattice.size() == 21);
  const auto ok = validate_product_structure(V, capital_stock_structure(cap, S), lattice, 2e-2);
  CHECK(ok.pass);

  const TimeStateField autonomous = [](double, const Vec& x) { return std::sin(x(0)) + 2.0; };
  ProductStructure trivial;
  trivial.z_indices = {0};
  trivial.R = [](double, const Vec&) { return 1.0; };
  trivial.S = [](const Vec& x) { return std::sin(x(0)) + 2.0; };
  const auto exact = validate_product_structure(autonomous, trivial, lattice);
  CHECK(exact.pass);
  CHECK(exact.max_rel_error == 0.0);

  auto wrong = capital_stock_structure(cap, [&S](const Vec& x) { return S(x) + 0.1 * x(0); });
  CHECK_FALSE(validate_product_structure(V, wrong, lattice, 2e-2).pass);

  trivial.Z = StateBox{scalar_vec(0.0), scalar_vec(0.5)};
  CHECK_THROWS_AS(validate_product_structure(autonomous, trivial, lattice), ArgumentError);
}

TEST_CASE("capital-stock region classifier") {
  const auto cap = builtin_problem("capital-stock");
  const auto grid = solve_finite_horizon(cap, GridSpec::uniform(scalar_vec(-0.5), scalar_vec(3.5), 0.01, 0.01, 4.0));
  const TimeStateField V = [&grid](double t, const Vec& x) { return grid.evaluate(t, x); };
  const auto left = lipschitz_region_classifier(cap, V, StateBox{scalar_vec(0.1), scalar_vec(0.9)}, {8});
  for (const auto& c : left.entries) {
    CHECK(c.route == HypothesisRoute::Interior);
    CHECK(c.lipschitz_observed);
  }
  const auto right = lipschitz_region_classifier(cap, V, StateBox{scalar_vec(1.1), scalar_vec(2.0)}, {9});
  for (const auto& c : right.entries) {
    CHECK(c.route == HypothesisRoute::Separation);
    CHECK(c.lipschitz_observed);
  }
  const auto straddle = classify_cell(cap, V, scalar_vec(1.0), scalar_vec(0.05));
  CHECK_FALSE(straddle.hypothesis_met);
  CHECK(straddle.code() == (straddle.lipschitz_observed ? 1 : 0));

  const auto path = std::filesystem::temp_directory_path() / "horizonlab_region.csv";
  right.write_csv(path.string());
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "x0,route,hypothesis_met,lipschitz_observed,local_constant,code");
  std::filesystem::remove(path);
  CHECK(right.summary()["routes"]["separation"] == 9);
}

TEST_CASE("double-integrator region split") {
  const auto di = builtin_problem("double-integrator");
  ClassifierOptions o;
  o.charts = {double_integrator_structure(DoubleIntegratorChart::Sqrt, 1.0),
              double_integrator_structure(DoubleIntegratorChart::Ratio, 1.0)};
  const auto map = lipschitz_region_classifier(di, {}, StateBox{make_vec({-2.0, 0.05}), make_vec({2.0, 1.05})},
                                               {16, 5}, o);
  int checked = 0;
  for (const auto& c : map.entries) {
    const double y1 = c.center(0), y2 = c.center(1);
    // only cells well away from the parabola y1^2 = 2 y2
    const double hw1 = 0.125, hw2 = 0.1;
    const double lo = (std::abs(y1) - hw1) * (std::abs(y1) - hw1), hi = (std::abs(y1) + hw1) * (std::abs(y1) + hw1);
    if (hi < 2.0 * (y2 - hw2) - 0.3) {
      CHECK(c.route == HypothesisRoute::MinTime);
      CHECK(c.chart == "sqrt-chart");
      ++checked;
    } else if (lo > 2.0 * (y2 + hw2) + 0.3) {
      CHECK(c.route == HypothesisRoute::Separation);
      ++checked;
    }
  }
  CHECK(checked >= 20);
}

TEST_CASE("Example-2 homogeneity") {
  const auto di = builtin_problem("double-integrator");
  const auto rep = example2_homogeneity(di, 2.0);
  CHECK(rep.cost_homogeneous);
  CHECK(rep.value_pairs.size() == 10);
  CHECK(rep.trajectory_pairs.size() == 10);
  CHECK(rep.pass);
  CHECK(rep.max_rel_error <= 2e-2);
  CHECK(rep.stated_max_rel_error > 0.1);
  CHECK(rep.exponent == 3.0);
  CHECK(rep.to_json()["note"].get<std::string>().find("k-1") != std::string::npos);
}
