#include "doctest.h"

#include "horizonlab/value_solver.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <random>

using namespace horizonlab;

namespace {

constexpr double kLn2 = std::numbers::ln2;

// V^T(0, b) for the linear-l1 problem (T > ln 2): b e^{-T} - 1/2 - b + ln2 / 2.
double linear_l1_value(double b, double T) { return b * std::exp(-T) - 0.5 - b + kLn2 / 2.0; }

GridSpec l1_grid(double T, double h = 0.01, double dt = 0.01) {
  return GridSpec::uniform(scalar_vec(-3.0), scalar_vec(3.0), h, dt, T);
}

const ValueGrid& l1_T2() {
  static const ValueGrid grid = solve_finite_horizon(builtin_problem("linear-l1"), l1_grid(2.0));
  return grid;
}

}  // namespace

TEST_CASE("solve_finite_horizon reproduces the linear-l1 closed form") {
  const auto& V = l1_T2();
  CHECK(std::abs(V.evaluate(0.0, scalar_vec(0.0)) - (kLn2 - 1.0) / 2.0) <= 2e-2);
  CHECK(std::abs(V.evaluate(0.0, scalar_vec(1.0)) - linear_l1_value(1.0, 2.0)) <= 2e-2);
  // the quoted -1.01806 is a rounding of e^-2 - 1.5 + ln2/2 = -1.018091
  CHECK(std::abs(linear_l1_value(1.0, 2.0) - (-1.01806)) < 1e-4);
  // every layer ends at zero
  for (std::size_t j = 0; j < V.nodes_per_layer(); ++j) CHECK(V.node_value(V.num_layers() - 1, j) == 0.0);
}

TEST_CASE("zero running cost gives a zero table") {
  const auto p = builtin_problem("linear-l1").with_running_cost(
      [](double, const Vec&, const Vec&) { return 0.0; }, "zero");
  const auto V = solve_finite_horizon(p, l1_grid(0.5, 0.05, 0.05));
  for (double v : V.raw_values()) CHECK(v == 0.0);
}

TEST_CASE("grid refinement reduces the error monotonically") {
  const auto p = builtin_problem("linear-l1");
  double prev = 1e9;
  for (double h : {0.04, 0.02, 0.01}) {
    const auto V = solve_finite_horizon(p, l1_grid(2.0, h, h));
    const double err = std::abs(V.evaluate(0.0, scalar_vec(0.5)) - linear_l1_value(0.5, 2.0));
    CHECK(err < prev);
    prev = err;
  }
}

TEST_CASE("Heun time stepping converges at second order") {
  const auto p = builtin_problem("linear-l1");
  std::vector<double> errs;
  for (double h : {0.04, 0.02, 0.01}) {
    auto spec = l1_grid(2.0, h, h);
    spec.scheme = TimeScheme::Heun;
    const auto V = solve_finite_horizon(p, spec);
    errs.push_back(std::abs(V.evaluate(0.0, scalar_vec(1.0)) - linear_l1_value(1.0, 2.0)));
  }
  CHECK(errs[0] / errs[1] > 3.0);
  CHECK(errs[1] / errs[2] > 3.0);
  CHECK(errs[2] < 1e-4);
  auto spec = l1_grid(1.0);
  spec.scheme = TimeScheme::Heun;
  CHECK(GridSpec::from_json(spec.to_json()).key() == spec.key());
  CHECK(spec.key() != l1_grid(1.0).key());
}

TEST_CASE("bolza_extend") {
  const auto p = builtin_problem("linear-l1");
  const auto spec = l1_grid(1.0, 0.02, 0.02);
  const auto zero = solve_finite_horizon(p, spec);
  SUBCASE("zero terminal reproduces the finite-horizon table") {
    const auto B = bolza_extend(p, spec, [](const Vec&) { return 0.0; });
    CHECK(B.raw_values() == zero.raw_values());
  }
  SUBCASE("constant terminal shifts every node by the constant") {
    const double c = 0.75;
    const auto B = bolza_extend(p, spec, [c](const Vec&) { return c; });
    for (std::size_t k = 0; k < B.raw_values().size(); ++k) {
      CHECK(std::abs(B.raw_values()[k] - zero.raw_values()[k] - c) < 1e-12);
    }
  }
  SUBCASE("the V^all profile is a fixed point of the recursion") {
    const double c = (kLn2 - 1.0) / 2.0;
    const auto B = bolza_extend(p, l1_grid(2.0), [c](const Vec& x) { return -x(0) + c; });
    for (double b : {-2.0, -1.0, 0.0, 0.5, 1.0, 2.0}) {
      CHECK(std::abs(B.evaluate(0.0, scalar_vec(b)) - (-b + c)) <= 2e-2);
    }
  }
  SUBCASE("Bolza with terminal V(T', .) recovers V(0, .) by DPP") {
    const auto V = solve_finite_horizon(p, l1_grid(2.0, 0.02, 0.02));
    const double Tp = 1.2;
    const auto B = bolza_extend(p, l1_grid(Tp, 0.02, 0.02),
                                [&V, Tp](const Vec& x) { return V.evaluate(Tp, x); });
    for (std::size_t j = 0; j < B.nodes_per_layer(); ++j) {
      CHECK(std::abs(B.node_value(0, j) - V.node_value(0, j)) < 1e-9);
    }
  }
}

TEST_CASE("evaluate interpolation rules") {
  GridSpec spec = GridSpec::uniform(scalar_vec(0.0), scalar_vec(1.0), 0.25, 0.5, 1.0);
  std::vector<double> values;
  for (int layer = 0; layer < 3; ++layer) {
    for (int j = 0; j < 5; ++j) values.push_back(2.0 - 0.25 * j);  // linear in x, constant in t
  }
  const ValueGrid V(spec, values, "zero");
  CHECK(V.evaluate(0.5, scalar_vec(0.25)) == 1.75);
  CHECK(V.evaluate(0.0, scalar_vec(0.375)) == doctest::Approx(0.5 * (1.75 + 1.5)));
  CHECK(V.evaluate(0.3, scalar_vec(0.5)) == doctest::Approx(1.5));
  CHECK(V.evaluate(0.7, scalar_vec(1.0)) == doctest::Approx(1.0));
  // clamp-extrapolate: out-of-box queries are clamped
  CHECK(V.evaluate(0.0, scalar_vec(7.0)) == doctest::Approx(1.0));

  GridSpec two = GridSpec::uniform(make_vec({0.0, 0.0}), make_vec({1.0, 1.0}), 0.5, 1.0, 1.0);
  std::vector<double> bil;
  for (int layer = 0; layer < 2; ++layer)
    for (int j = 0; j < 3; ++j)
      for (int i = 0; i < 3; ++i) bil.push_back(0.5 * i + 2.0 * 0.5 * j + 0.25 * i * j);
  const ValueGrid W(two, bil, "zero");
  // multilinear interpolation reproduces a + b x + c y + d x y exactly
  const double x = 0.3, y = 0.8;
  CHECK(W.evaluate(0.0, make_vec({x, y})) == doctest::Approx(x + 2.0 * y + x * y));
}

TEST_CASE("large-penalty boundary records out-of-box queries") {
  auto spec = GridSpec::uniform(scalar_vec(-0.5), scalar_vec(0.5), 0.05, 0.05, 0.5);
  spec.boundary = BoundaryPolicy::LargePenalty;
  const auto V = solve_finite_horizon(builtin_problem("linear-l1"), spec);
  CHECK(V.out_of_box_queries() > 0);
  CHECK(V.evaluate(0.0, scalar_vec(3.0)) == spec.penalty);
}

TEST_CASE("solver reports non-finite tables") {
  const auto p = builtin_problem("linear-l1");
  const auto spec = l1_grid(0.1, 0.1, 0.05);
  CHECK_THROWS_AS(bolza_extend(p, spec, [](const Vec& x) { return x(0) > 1.0 ? NAN : 0.0; }), SolverError);
  GridSpec bad = spec;
  bad.dt = 0.0;
  CHECK_THROWS_AS(solve_finite_horizon(p, bad), ArgumentError);
  bad = spec;
  bad.upper = scalar_vec(-4.0);
  CHECK_THROWS_AS(solve_finite_horizon(p, bad), ArgumentError);
}

TEST_CASE("nonnegative running cost gives values nonincreasing in t") {
  const auto p = builtin_problem("capital-stock");
  const auto V = solve_finite_horizon(p, GridSpec::uniform(scalar_vec(0.0), scalar_vec(2.0), 0.02, 0.02, 2.0));
  for (int i = 0; i + 1 < V.num_layers(); ++i) {
    for (std::size_t j = 0; j < V.nodes_per_layer(); j += 7) {
      CHECK(V.node_value(i, j) >= V.node_value(i + 1, j) - 1e-12);
    }
  }
}

TEST_CASE("comparison principle") {
  const auto p = builtin_problem("capital-stock");
  const auto q = p.with_running_cost(
      [base = p](double t, const Vec& x, const Vec& u) { return base.running_cost(t, x, u) + 0.1 * x(0) * x(0); },
      "heavier");
  const auto spec = GridSpec::uniform(scalar_vec(0.0), scalar_vec(2.0), 0.05, 0.05, 1.5);
  const auto A = solve_finite_horizon(p, spec);
  const auto B = solve_finite_horizon(q, spec);
  for (std::size_t k = 0; k < A.raw_values().size(); ++k) {
    CHECK(A.raw_values()[k] <= B.raw_values()[k] + 1e-12);
  }
}

TEST_CASE("dpp_residual") {
  const auto p = builtin_problem("linear-l1");
  SUBCASE("computed table, with a refinement oracle") {
    const auto coarse = solve_finite_horizon(p, l1_grid(2.0, 0.04, 0.04));
    const auto fine = solve_finite_horizon(p, l1_grid(2.0, 0.02, 0.02));
    CHECK(std::abs(dpp_residual(l1_T2(), p, 0.0, 0.5, scalar_vec(0.0))) <= 5e-2);
    // at b = 0 the optimal path stays put and the residual vanishes; b = 0.5 exercises the error
    const double rc = dpp_residual(coarse, p, 0.0, 0.5, scalar_vec(0.5));
    const double rf = dpp_residual(fine, p, 0.0, 0.5, scalar_vec(0.5));
    const double r = dpp_residual(l1_T2(), p, 0.0, 0.5, scalar_vec(0.5));
    CHECK(std::abs(rf) < std::abs(rc));
    CHECK(std::abs(r) < std::abs(rf));
  }
  SUBCASE("zero value with unit cost") {
    const auto q = p.with_running_cost([](double, const Vec&, const Vec&) { return 1.0; }, "unit");
    const double r = dpp_residual([](double, const Vec&) { return 0.0; }, q, 0.2, 1.1, scalar_vec(0.3));
    CHECK(r == doctest::Approx(-(1.1 - 0.2)).epsilon(1e-12));
  }
  SUBCASE("the affine V^all profile solves the DPP") {
    const double c = (kLn2 - 1.0) / 2.0;
    for (double b : {-1.0, 0.0, 1.0}) {
      const double r = dpp_residual([c](double, const Vec& x) { return -x(0) + c; }, p, 0.0, 1.0, scalar_vec(b));
      CHECK(std::abs(r) <= 5e-2);
    }
  }
  CHECK_THROWS_AS(dpp_residual(l1_T2(), p, 1.0, 0.5, scalar_vec(0.0)), ArgumentError);
}

TEST_CASE("value grid CSV and binary round trips are bit-exact") {
  const auto V = solve_finite_horizon(builtin_problem("capital-stock"),
                                      GridSpec::uniform(scalar_vec(0.0), scalar_vec(1.0), 0.1, 0.1, 0.5));
  const auto dir = std::filesystem::temp_directory_path() / "horizonlab_vs_test";
  std::filesystem::create_directories(dir);
  const auto csv = (dir / "v.csv").string(), json = (dir / "v.json").string(), bin = (dir / "v.bin").string();
  write_value_csv(V, csv);
  write_value_sidecar(V, json);
  write_value_binary(V, bin);
  const auto a = read_value_csv(csv, json);
  const auto b = read_value_binary(bin, json);
  CHECK(a.raw_values() == V.raw_values());
  CHECK(b.raw_values() == V.raw_values());
  CHECK(a.spec().key() == V.spec().key());
  std::filesystem::remove_all(dir);
}

TEST_CASE("grid cache shares solved tables") {
  ValueGridCache cache;
  const auto p = builtin_problem("linear-l1");
  const auto spec = l1_grid(0.5, 0.05, 0.05);
  const auto a = cache.get(p, spec);
  const auto b = cache.get(p, spec);
  CHECK(a.get() == b.get());
  cache.get(p, spec.with_horizon(1.0));
  CHECK(cache.size() == 2);
}
