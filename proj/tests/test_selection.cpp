#include <doctest.h>

#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "fedsel/quadratic.hpp"
#include "fedsel/selection.hpp"
#include "fedsel/synthetic.hpp"
#include "oracles.hpp"

using namespace fedsel;

namespace {

std::vector<int> full_pool(int K) {
  std::vector<int> pool(static_cast<std::size_t>(K));
  std::iota(pool.begin(), pool.end(), 0);
  return pool;
}

int subset_index(const std::vector<int>& selected, int K) {
  int idx = 0;
  for (int k : selected) idx |= 1 << k;
  (void)K;
  return idx;
}

}  // namespace

TEST_CASE("single client is always selected") {
  const DataFractions p{{1.0}};
  Rng rng = make_stream(1, {1});
  const auto pool = full_pool(1);
  for (int it = 0; it < 10; ++it) {
    CHECK(select_rand(p, 1, true, pool, rng) == std::vector<int>{0});
    CHECK(select_rand(p, 1, false, pool, rng) == std::vector<int>{0});
  }
}

TEST_CASE("rand with replacement matches the marginal fractions") {
  const DataFractions p{{0.5, 0.3, 0.2}};
  Rng rng = make_stream(2, {1});
  const auto pool = full_pool(3);
  const int draws = 100000;
  std::vector<double> counts(3, 0.0);
  for (int it = 0; it < draws; ++it) {
    for (int k : select_rand(p, 1, true, pool, rng)) counts[static_cast<std::size_t>(k)] += 1.0;
  }
  for (int k = 0; k < 3; ++k) {
    const double se = std::sqrt(p[k] * (1 - p[k]) * draws);
    CHECK(std::abs(counts[static_cast<std::size_t>(k)] - p[k] * draws) < 3.0 * se);
  }
}

TEST_CASE("rand without replacement matches the enumeration oracle") {
  const DataFractions p{{0.5, 0.3, 0.2}};
  // P(0 in S) over both ordered draws, exactly.
  double p0 = 0.0;
  oracles::for_each_weighted_sequence(p.p, 2, [&](const std::vector<int>& seq, double prob) {
    if (seq[0] == 0 || seq[1] == 0) p0 += prob;
  });
  CHECK(p0 == doctest::Approx(47.0 / 56.0).epsilon(1e-12));

  Rng rng = make_stream(3, {1});
  const auto pool = full_pool(3);
  const int draws = 100000;
  double hits = 0.0;
  for (int it = 0; it < draws; ++it) {
    const auto selected = select_rand(p, 2, false, pool, rng);
    CHECK(selected.size() == 2);
    CHECK(selected[0] != selected[1]);
    if (selected[0] == 0 || selected[1] == 0) hits += 1.0;
  }
  const double se = std::sqrt(p0 * (1 - p0) * draws);
  CHECK(std::abs(hits - p0 * draws) < 3.0 * se);
}

TEST_CASE("rand input validation") {
  const DataFractions p{{0.6, 0.4}};
  Rng rng = make_stream(4, {1});
  CHECK_THROWS_AS(select_rand(p, 1, true, std::vector<int>{}, rng), std::invalid_argument);
  CHECK_THROWS_AS(select_rand(p, 3, false, full_pool(2), rng), std::invalid_argument);
}

TEST_CASE("pow-d picks the argmax-loss client when d = K, m = 1") {
  const QuadraticTask task = generate_quadratic(5, 2, 3.0, 5);
  const ParamVector w = {4.0, -3.0};
  int argmax = 0;
  for (int k = 1; k < 5; ++k) {
    if (task.loss(k, w) > task.loss(argmax, w)) argmax = k;
  }
  SelectionConfig config;
  config.kind = StrategyKind::kPowD;
  config.selected_count = 1;
  config.candidate_count = 5;
  Rng rng = make_stream(6, {1});
  for (int it = 0; it < 50; ++it) {
    CHECK(select_pow_d(task, w, config, full_pool(5), rng) == std::vector<int>{argmax});
  }
}

TEST_CASE("all-equal losses reduce pow-d to uniform tie-breaking over m-subsets") {
  // identical clients: every loss equal at any w
  const int K = 5, m = 2;
  const QuadraticTask task(std::vector<double>(K, 2.0),
                           std::vector<ParamVector>(K, ParamVector{1.0}),
                           DataFractions::normalized(std::vector<double>(K, 1.0)));
  SelectionConfig config;
  config.kind = StrategyKind::kPowD;
  config.selected_count = m;
  config.candidate_count = K;
  Rng rng = make_stream(7, {1});
  const int draws = 100000;
  std::map<int, double> counts;
  for (int it = 0; it < draws; ++it) {
    counts[subset_index(select_pow_d(task, {0.3}, config, full_pool(K), rng), K)] += 1.0;
  }
  REQUIRE(counts.size() == 10);  // C(5,2)
  std::vector<double> observed;
  for (const auto& [idx, c] : counts) observed.push_back(c);
  const std::vector<double> uniform(10, 0.1);
  const double stat = oracles::chi_square_statistic(observed, uniform, draws);
  CHECK(stat < oracles::chi_square_critical(9));
}

TEST_CASE("pow-d with d = m equals rand without replacement") {
  const QuadraticTask task = generate_quadratic(5, 3, 3.0, 8);
  SelectionConfig config;
  config.kind = StrategyKind::kPowD;
  config.selected_count = 2;
  config.candidate_count = 2;
  const ParamVector w = vec::zeros(3);
  const int draws = 100000;

  Rng rng_a = make_stream(9, {1});
  Rng rng_b = make_stream(9, {2});
  std::map<int, double> pow_counts, rand_counts;
  for (int it = 0; it < draws; ++it) {
    pow_counts[subset_index(select_pow_d(task, w, config, full_pool(5), rng_a), 5)] += 1.0;
    rand_counts[subset_index(select_rand(task.fractions(), 2, false, full_pool(5), rng_b), 5)] += 1.0;
  }
  std::set<int> keys;
  for (const auto& [k, v] : pow_counts) keys.insert(k);
  for (const auto& [k, v] : rand_counts) keys.insert(k);
  std::vector<double> a, b;
  for (int k : keys) {
    a.push_back(pow_counts[k]);
    b.push_back(rand_counts[k]);
  }
  int df = 0;
  const double stat = oracles::two_sample_chi_square(a, b, &df);
  CHECK(stat < oracles::chi_square_critical(df));
}

TEST_CASE("pow-d depends on losses only through their ranking") {
  const QuadraticTask task = generate_quadratic(6, 2, 3.0, 10);
  SelectionConfig config;
  config.kind = StrategyKind::kPowD;
  config.selected_count = 2;
  config.candidate_count = 4;
  const ParamVector w = {0.7, -0.2};

  // A transformed task whose losses are a strictly increasing function of the
  // original ones: scale every curvature and linear term by the same factor,
  // which multiplies each loss by 3.
  std::vector<double> h;
  std::vector<ParamVector> e;
  for (int k = 0; k < 6; ++k) {
    h.push_back(3.0 * task.curvature(k));
    ParamVector ek = task.linear_term(k);
    for (double& v : ek) v *= 3.0;
    e.push_back(std::move(ek));
  }
  const QuadraticTask scaled(h, e, task.fractions());

  for (int it = 0; it < 2000; ++it) {
    Rng rng_a = make_stream(11, {static_cast<std::uint64_t>(it)});
    Rng rng_b = make_stream(11, {static_cast<std::uint64_t>(it)});
    CHECK(select_pow_d(task, w, config, full_pool(6), rng_a) ==
          select_pow_d(scaled, w, config, full_pool(6), rng_b));
  }
}

TEST_CASE("pow-d clamps d to the pool and errors when m cannot be met") {
  const QuadraticTask task = generate_quadratic(6, 2, 3.0, 12);
  SelectionConfig config;
  config.kind = StrategyKind::kPowD;
  config.selected_count = 2;
  config.candidate_count = 5;
  Rng rng = make_stream(13, {1});
  const std::vector<int> pool = {0, 2, 4};  // smaller than d: clamp
  for (int it = 0; it < 20; ++it) {
    const auto selected = select_pow_d(task, vec::zeros(2), config, pool, rng);
    CHECK(selected.size() == 2);
    for (int k : selected) CHECK((k == 0 || k == 2 || k == 4));
  }
  const std::vector<int> tiny = {3};  // cannot supply m = 2
  CHECK_THROWS_AS(select_pow_d(task, vec::zeros(2), config, tiny, rng), std::invalid_argument);
}

TEST_CASE("cpow-d equals pow-d when the estimate uses the full batch") {
  const QuadraticTask task = generate_quadratic(5, 2, 3.0, 14);
  SelectionConfig config;
  config.kind = StrategyKind::kCPowD;
  config.selected_count = 2;
  config.candidate_count = 4;
  config.estimate_batch_size = 0;  // full batch
  SelectionConfig exact = config;
  exact.kind = StrategyKind::kPowD;
  const ParamVector w = {0.4, 0.1};
  for (int it = 0; it < 1000; ++it) {
    Rng rng_a = make_stream(15, {static_cast<std::uint64_t>(it)});
    Rng rng_b = make_stream(15, {static_cast<std::uint64_t>(it)});
    CHECK(select_cpow_d(task, w, config, full_pool(5), rng_a) ==
          select_pow_d(task, w, exact, full_pool(5), rng_b));
  }
}

TEST_CASE("cpow-d favors high-loss clients more than rand on sampled data") {
  auto data = std::make_shared<const SyntheticDataset>(
      generate_synthetic(1.0, 1.0, 6, 3.0, 101, 30, 60));
  const SyntheticLogisticTask task(std::move(data));
  Rng wrng = make_stream(102, {1});
  std::normal_distribution<double> noise(0.0, 0.1);
  ParamVector w(static_cast<std::size_t>(task.dimension()));
  for (double& v : w) v = noise(wrng);

  // the two clients with the highest exact loss at w
  std::vector<int> order(6);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return task.loss(a, w) > task.loss(b, w); });
  const std::set<int> top(order.begin(), order.begin() + 2);

  SelectionConfig config;
  config.kind = StrategyKind::kCPowD;
  config.selected_count = 2;
  config.candidate_count = 6;
  config.estimate_batch_size = 10;

  Rng rng_c = make_stream(103, {1});
  Rng rng_r = make_stream(103, {2});
  const int trials = 10000;
  double cpow_mass = 0.0, rand_mass = 0.0;
  for (int it = 0; it < trials; ++it) {
    for (int k : select_cpow_d(task, w, config, full_pool(6), rng_c)) {
      if (top.count(k)) cpow_mass += 1.0;
    }
    for (int k : select_rand(task.fractions(), 2, true, full_pool(6), rng_r)) {
      if (top.count(k)) rand_mass += 1.0;
    }
  }
  CHECK(cpow_mass > rand_mass);
}

TEST_CASE("selection config validation") {
  SelectionConfig config;
  config.kind = StrategyKind::kPowD;
  config.selected_count = 3;
  config.candidate_count = 2;  // d < m
  CHECK_THROWS_AS(config.validate(10), std::invalid_argument);
  config.candidate_count = 11;  // d > K
  CHECK_THROWS_AS(config.validate(10), std::invalid_argument);
  config.candidate_count = 5;
  CHECK_NOTHROW(config.validate(10));
  config.selected_count = 0;
  CHECK_THROWS_AS(config.validate(10), std::invalid_argument);
}

TEST_CASE("rpow-d state starts at infinity and keeps the latest report") {
  SelectionState state = SelectionState::init(3);
  for (double v : state.last_reported_loss) CHECK(std::isinf(v));
  report_round_loss(state, 1, 2.5);
  report_round_loss(state, 1, 1.5);
  CHECK(state.last_reported_loss[1] == 1.5);
  CHECK(std::isinf(state.last_reported_loss[0]));
  report_round_loss(state, 0, 0.5);
  report_round_loss(state, 2, 0.25);
  for (double v : state.last_reported_loss) CHECK(std::isfinite(v));
}

TEST_CASE("rpow-d round-0 selection is uniform over m-subsets") {
  const int K = 5, m = 2;
  const DataFractions p = DataFractions::normalized({5.0, 4.0, 3.0, 2.0, 1.0});
  SelectionConfig config;
  config.kind = StrategyKind::kRPowD;
  config.selected_count = m;
  config.candidate_count = K;  // candidate set is the whole pool
  const SelectionState state = SelectionState::init(K);
  Rng rng = make_stream(16, {1});
  const int draws = 100000;
  std::map<int, double> counts;
  for (int it = 0; it < draws; ++it) {
    counts[subset_index(select_rpow_d(state, p, config, full_pool(K), rng), K)] += 1.0;
  }
  REQUIRE(counts.size() == 10);
  std::vector<double> observed;
  for (const auto& [idx, c] : counts) observed.push_back(c);
  const double stat = oracles::chi_square_statistic(observed, std::vector<double>(10, 0.1), draws);
  CHECK(stat < oracles::chi_square_critical(9));
}

TEST_CASE("rpow-d: the infinity sentinel dominates every finite report") {
  const int K = 4;
  const DataFractions p = DataFractions::normalized({1.0, 1.0, 1.0, 1.0});
  SelectionState state = SelectionState::init(K);
  report_round_loss(state, 0, 10.0);
  report_round_loss(state, 1, 20.0);
  report_round_loss(state, 3, 30.0);  // client 2 never reported
  SelectionConfig config;
  config.kind = StrategyKind::kRPowD;
  config.selected_count = 1;
  config.candidate_count = K;
  Rng rng = make_stream(17, {1});
  for (int it = 0; it < 100; ++it) {
    CHECK(select_rpow_d(state, p, config, full_pool(K), rng) == std::vector<int>{2});
  }
}

TEST_CASE("rpow-d ranks by the stored values") {
  const DataFractions p = DataFractions::normalized({1.0, 1.0, 1.0});
  SelectionState state = SelectionState::init(3);
  report_round_loss(state, 0, 3.0);
  report_round_loss(state, 1, 1.0);
  report_round_loss(state, 2, 2.0);
  SelectionConfig config;
  config.kind = StrategyKind::kRPowD;
  config.selected_count = 1;
  config.candidate_count = 3;
  Rng rng = make_stream(18, {1});
  CHECK(select_rpow_d(state, p, config, full_pool(3), rng) == std::vector<int>{0});
}

TEST_CASE("rpow-d with full reports selects like pow-d on the reported losses") {
  const QuadraticTask task = generate_quadratic(5, 2, 3.0, 19);
  const ParamVector w = {0.2, 0.9};
  SelectionState state = SelectionState::init(5);
  for (int k = 0; k < 5; ++k) report_round_loss(state, k, task.loss(k, w));
  SelectionConfig config;
  config.selected_count = 2;
  config.candidate_count = 5;
  for (int it = 0; it < 1000; ++it) {
    Rng rng_a = make_stream(20, {static_cast<std::uint64_t>(it)});
    Rng rng_b = make_stream(20, {static_cast<std::uint64_t>(it)});
    SelectionConfig rp = config;
    rp.kind = StrategyKind::kRPowD;
    SelectionConfig pd = config;
    pd.kind = StrategyKind::kPowD;
    CHECK(select_rpow_d(state, task.fractions(), rp, full_pool(5), rng_a) ==
          select_pow_d(task, w, pd, full_pool(5), rng_b));
  }
}

TEST_CASE("frequency profile counts selections and sums to one") {
  const std::vector<std::vector<int>> history = {{0}, {0}, {1}};
  const std::vector<double> profile = frequency_profile(history, 3);
  CHECK(profile[0] == doctest::Approx(2.0 / 3.0));
  CHECK(profile[1] == doctest::Approx(1.0 / 3.0));
  CHECK(profile[2] == 0.0);
  CHECK_THROWS_AS(frequency_profile({}, 3), std::invalid_argument);
}

TEST_CASE("long-run rand profile approximates the data fractions") {
  const QuadraticTask task = generate_quadratic(6, 2, 3.0, 21);
  Rng rng = make_stream(22, {1});
  std::vector<std::vector<int>> history;
  const int rounds = 20000;
  for (int r = 0; r < rounds; ++r) {
    history.push_back(select_rand(task.fractions(), 2, true, full_pool(6), rng));
  }
  const std::vector<double> profile = frequency_profile(history, 6);
  for (int k = 0; k < 6; ++k) {
    const double p = task.fractions()[k];
    const double se = std::sqrt(p * (1 - p) / (2.0 * rounds));
    CHECK(std::abs(profile[static_cast<std::size_t>(k)] - p) < 4.0 * se);
  }
}

TEST_CASE("pow-d profile deviates from the data fractions on heterogeneous tasks") {
  const QuadraticTask task = generate_quadratic(6, 2, 3.0, 23);
  SelectionConfig config;
  config.kind = StrategyKind::kPowD;
  config.selected_count = 2;
  config.candidate_count = 6;
  Rng rng = make_stream(24, {1});
  const ParamVector w = vec::zeros(2);
  std::vector<std::vector<int>> history;
  const int rounds = 20000;
  for (int r = 0; r < rounds; ++r) {
    history.push_back(select_pow_d(task, w, config, full_pool(6), rng));
  }
  const std::vector<double> profile = frequency_profile(history, 6);
  std::vector<double> counts;
  std::vector<double> expected;
  for (int k = 0; k < 6; ++k) {
    counts.push_back(profile[static_cast<std::size_t>(k)] * 2.0 * rounds);
    expected.push_back(task.fractions()[k]);
  }
  // chi-square against proportionality to p at significance 0.01
  const double stat = oracles::chi_square_statistic(counts, expected, 2.0 * rounds);
  CHECK(stat > oracles::chi_square_critical(5));
}

TEST_CASE("always-on availability exposes every client") {
  Rng rng = make_stream(25, {1});
  const AvailabilityModel model;
  CHECK(available_pool(model, 7, 0, rng) == full_pool(7));
  CHECK(available_pool(model, 7, 3, rng) == full_pool(7));
}

TEST_CASE("alternating availability restricts to one group minus exclusions") {
  AvailabilityModel model;
  model.mode = AvailabilityModel::Mode::kAlternatingGroups;
  model.exclusion_fraction = 0.1;
  const int K = 30;
  for (int round = 0; round < 8; ++round) {
    Rng rng = make_stream(26, {static_cast<std::uint64_t>(round)});
    const std::vector<int> pool = available_pool(model, K, round, rng);
    const int lo = (round % 2 == 0) ? 0 : 15;
    const int hi = (round % 2 == 0) ? 15 : 30;
    CHECK(pool.size() == 13);  // 15 - round(0.1 * 15) = 13
    for (int k : pool) {
      CHECK(k >= lo);
      CHECK(k < hi);
    }
  }
}

TEST_CASE("sampler set distribution matches the enumeration oracle on random instances") {
  for (std::uint64_t instance = 0; instance < 3; ++instance) {
    Rng setup = make_stream(900 + instance, {1});
    std::uniform_real_distribution<double> weight_dist(0.1, 1.0);
    std::vector<double> weights(4);
    for (double& w : weights) w = weight_dist(setup);

    // exact probability of every unordered pair from two sequential draws
    std::map<std::set<int>, double> exact;
    oracles::for_each_weighted_sequence(weights, 2, [&](const std::vector<int>& seq, double prob) {
      exact[std::set<int>(seq.begin(), seq.end())] += prob;
    });

    Rng rng = make_stream(901 + instance, {2});
    const int draws = 40000;
    std::map<std::set<int>, double> counts;
    for (int it = 0; it < draws; ++it) {
      const auto sel = weighted_sample_without_replacement(weights, 2, rng);
      counts[std::set<int>(sel.begin(), sel.end())] += 1.0;
    }
    std::vector<double> observed, expected;
    for (const auto& [pair, prob] : exact) {
      observed.push_back(counts[pair]);
      expected.push_back(prob);
    }
    const double stat = oracles::chi_square_statistic(observed, expected, draws);
    CHECK(stat < oracles::chi_square_critical(static_cast<int>(exact.size()) - 1));
  }
}

TEST_CASE("weighted sampling without replacement covers exact small cases") {
  // weights (2, 1), two draws: P(first = 0) = 2/3
  const std::vector<double> weights = {2.0, 1.0};
  Rng rng = make_stream(27, {1});
  const int draws = 50000;
  int first_zero = 0;
  for (int it = 0; it < draws; ++it) {
    const auto sel = weighted_sample_without_replacement(weights, 2, rng);
    REQUIRE(sel.size() == 2);
    CHECK(sel[0] != sel[1]);
    if (sel[0] == 0) ++first_zero;
  }
  const double p = 2.0 / 3.0;
  const double se = std::sqrt(p * (1 - p) * draws);
  CHECK(std::abs(first_zero - p * draws) < 3.0 * se);
  CHECK_THROWS_AS(weighted_sample_without_replacement(weights, 3, rng), std::invalid_argument);
}
