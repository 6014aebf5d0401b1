#include <doctest.h>

#include "fedsel/optimize.hpp"
#include "fedsel/quadratic.hpp"
#include "oracles.hpp"

using namespace fedsel;

TEST_CASE("generated tasks honor the documented distributions") {
  const QuadraticTask task = generate_quadratic(30, 5, 3.0, 42);
  REQUIRE(task.client_count() == 30);
  REQUIRE(task.dimension() == 5);
  double fraction_sum = 0.0;
  for (int k = 0; k < 30; ++k) {
    CHECK(task.curvature(k) >= 1.0);
    CHECK(task.curvature(k) <= 20.0);
    fraction_sum += task.fractions()[k];
    for (double v : task.local_optimum(k)) {
      CHECK(v >= 0.0);  // e_k = h_k * U(0,1) entries, so w_k* lies in [0,1]^v
      CHECK(v <= 1.0);
    }
  }
  CHECK(fraction_sum == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("single client forces p = [1]") {
  const QuadraticTask task = generate_quadratic(1, 1, 3.0, 5);
  CHECK(task.fractions()[0] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("seeded generation is deterministic") {
  const QuadraticTask a = generate_quadratic(3, 2, 3.0, 7);
  const QuadraticTask b = generate_quadratic(3, 2, 3.0, 7);
  for (int k = 0; k < 3; ++k) {
    CHECK(a.curvature(k) == b.curvature(k));
    CHECK(a.linear_term(k) == b.linear_term(k));
    CHECK(a.fractions()[k] == b.fractions()[k]);
  }
  const QuadraticTask c = generate_quadratic(3, 2, 3.0, 8);
  CHECK(a.curvature(0) != c.curvature(0));
}

TEST_CASE("generator rejects bad parameters") {
  CHECK_THROWS_AS(generate_quadratic(0, 5, 3.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(generate_quadratic(5, 0, 3.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(generate_quadratic(5, 5, -1.0, 1), std::invalid_argument);
}

TEST_CASE("loss formula on hand-checked points") {
  // h=2, e=0, w=(1,1): 1/2 * 2 * (1+1) = 2
  {
    const QuadraticTask task({2.0}, {{0.0, 0.0}}, DataFractions{{1.0}});
    CHECK(task.loss(0, {1.0, 1.0}) == doctest::Approx(2.0).epsilon(1e-12));
  }
  // h=4, e=(2,0), w=0: 1/2 e'H^{-1}e = 0.5
  {
    const QuadraticTask task({4.0}, {{2.0, 0.0}}, DataFractions{{1.0}});
    CHECK(task.loss(0, {0.0, 0.0}) == doctest::Approx(0.5).epsilon(1e-12));
  }
  // loss at the local optimum is exactly zero
  {
    const QuadraticTask task = generate_quadratic(4, 3, 3.0, 9);
    for (int k = 0; k < 4; ++k) CHECK(task.loss(k, task.local_optimum(k)) == 0.0);
  }
}

TEST_CASE("loss is nonnegative everywhere and zero only at the optimum") {
  const QuadraticTask task = generate_quadratic(6, 4, 3.0, 11);
  Rng rng = make_stream(13, {1});
  std::uniform_real_distribution<double> box(-3.0, 3.0);
  for (int trial = 0; trial < 200; ++trial) {
    ParamVector w(4);
    for (double& v : w) v = box(rng);
    const int k = trial % 6;
    const double value = task.loss(k, w);
    CHECK(value >= 0.0);
    if (vec::squared_distance(w, task.local_optimum(k)) > 1e-6) CHECK(value > 0.0);
  }
}

TEST_CASE("gradient on hand-checked points and at the optimum") {
  const QuadraticTask task({2.0}, {{1.0, 1.0}}, DataFractions{{1.0}});
  const ParamVector g = task.gradient(0, {0.0, 0.0});
  CHECK(g[0] == doctest::Approx(-1.0));
  CHECK(g[1] == doctest::Approx(-1.0));

  const QuadraticTask random_task = generate_quadratic(3, 4, 3.0, 17);
  for (int k = 0; k < 3; ++k) {
    for (double v : random_task.gradient(k, random_task.local_optimum(k))) {
      CHECK(std::abs(v) < 1e-12);
    }
  }
}

TEST_CASE("gradient matches central finite differences") {
  const QuadraticTask task = generate_quadratic(5, 4, 3.0, 23);
  Rng rng = make_stream(29, {1});
  std::uniform_real_distribution<double> box(-2.0, 2.0);
  for (int trial = 0; trial < 50; ++trial) {
    ParamVector w(4);
    for (double& v : w) v = box(rng);
    const int k = trial % 5;
    const ParamVector numeric = oracles::central_difference_gradient(
        [&](const ParamVector& x) { return task.loss(k, x); }, w);
    CHECK(oracles::max_relative_error(task.gradient(k, w), numeric) < 1e-6);
  }
}

TEST_CASE("dimension mismatches are rejected") {
  const QuadraticTask task = generate_quadratic(2, 3, 3.0, 31);
  CHECK_THROWS_AS(task.loss(0, {1.0}), std::invalid_argument);
  CHECK_THROWS_AS(task.gradient(0, {1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("closed-form optima: single client") {
  const QuadraticTask task = generate_quadratic(1, 3, 3.0, 37);
  const TaskOptima optima = quadratic_optima(task);
  CHECK(vec::squared_distance(optima.global_opt, task.local_optimum(0)) < 1e-24);
  CHECK(optima.global_value == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("closed-form optima: two-client hand evaluation") {
  // h=(1,1), e_1=(a), e_2=(-b): w* = p1 a - p2 b.
  const double a = 1.7, b = 0.4, p1 = 0.3, p2 = 0.7;
  const QuadraticTask task({1.0, 1.0}, {{a}, {-b}}, DataFractions{{p1, p2}});
  const TaskOptima optima = quadratic_optima(task);
  CHECK(optima.global_opt[0] == doctest::Approx(p1 * a - p2 * b).epsilon(1e-12));
}

TEST_CASE("gradient of F vanishes at w* and random probes cannot beat it") {
  const QuadraticTask task = generate_quadratic(8, 5, 3.0, 41);
  const TaskOptima optima = quadratic_optima(task);
  ParamVector grad = vec::zeros(5);
  for (int k = 0; k < 8; ++k) {
    vec::axpy(task.fractions()[k], task.gradient(k, optima.global_opt), grad);
  }
  CHECK(vec::norm(grad) < 1e-9);

  Rng rng = make_stream(43, {1});
  std::uniform_real_distribution<double> box(-2.0, 2.0);
  for (int trial = 0; trial < 100; ++trial) {
    ParamVector w(5);
    for (double& v : w) v = box(rng);
    CHECK(global_loss(task, w) >= optima.global_value - 1e-12);
  }
}

TEST_CASE("global loss is the fraction-weighted sum of local losses") {
  const QuadraticTask task = generate_quadratic(7, 3, 3.0, 47);
  Rng rng = make_stream(53, {1});
  std::uniform_real_distribution<double> box(-2.0, 2.0);
  for (int trial = 0; trial < 20; ++trial) {
    ParamVector w(3);
    for (double& v : w) v = box(rng);
    double manual = 0.0;
    for (int k = 0; k < 7; ++k) manual += task.fractions()[k] * task.loss(k, w);
    CHECK(global_loss(task, w) == doctest::Approx(manual).epsilon(1e-12));
  }
}

TEST_CASE("numeric optima agree with the closed forms") {
  const QuadraticTask task = generate_quadratic(5, 3, 3.0, 59);
  const TaskOptima exact = quadratic_optima(task);
  const TaskOptima numeric = numeric_optima(task, {.grad_tol = 1e-10, .max_iterations = 5000});
  CHECK(std::abs(exact.global_value - numeric.global_value) < 1e-9);
  CHECK(vec::squared_distance(exact.global_opt, numeric.global_opt) < 1e-12);
  for (int k = 0; k < 5; ++k) {
    CHECK(std::abs(exact.local_values[static_cast<std::size_t>(k)] -
                   numeric.local_values[static_cast<std::size_t>(k)]) < 1e-9);
  }
}

TEST_CASE("power-law sampler stays in range and rejects bad exponents") {
  Rng rng = make_stream(61, {1});
  const std::vector<double> xs = sample_power_law(1000, 3.0, rng);
  for (double x : xs) {
    CHECK(x > 0.0);
    CHECK(x <= 1.0);
  }
  // mean of a x^(a-1) on (0,1] is a/(a+1) = 0.75 for a=3
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  CHECK(mean == doctest::Approx(0.75).epsilon(0.03));
  CHECK_THROWS_AS(sample_power_law(10, 0.0, rng), std::invalid_argument);
}
