#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "fscil/error.hpp"
#include "fscil/uq_router.hpp"
#include "test_support.hpp"

using namespace fscil;
using fscil::testing::entropy_oracle;
using fscil::testing::random_distribution;

namespace {

ProbVector pv(std::vector<double> p, int first_id) {
  std::vector<int> ids(p.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = first_id + static_cast<int>(i);
  return {std::move(p), std::move(ids)};
}

// Enumerates every block independently: mass, renormalise, sum -q ln q.
BlockUncertainty brute_force_blocks(const std::vector<double>& p, std::size_t width) {
  double best = 0.0;
  std::size_t best_block = 0;
  bool any = false;
  for (std::size_t b = 0; b * width < p.size(); ++b) {
    double mass = 0.0;
    for (std::size_t i = 0; i < width; ++i) mass += p[b * width + i];
    if (!(mass > 0.0)) continue;
    double h = 0.0;
    for (std::size_t i = 0; i < width; ++i) {
      const double q = p[b * width + i] / mass;
      if (q > 0.0) h -= q * std::log(q);
    }
    if (h < 0.0) h = 0.0;
    if (!any || h < best) {
      best = h;
      best_block = b;
      any = true;
    }
  }
  if (!any) return {std::log(static_cast<double>(width)), 0};
  return {best, best_block};
}

}  // namespace

TEST_CASE("entropy examples") {
  CHECK(entropy(std::vector<double>{1, 0, 0, 0, 0}) == 0.0);
  CHECK(std::abs(entropy(std::vector<double>(5, 0.2)) - 1.6094379124341003746) < 1e-9);
  const std::vector<double> p = {0.7, 0.1, 0.1, 0.05, 0.05};
  CHECK(std::abs(entropy(p) - 1.009762706711320901) < 1e-9);
  CHECK(std::abs(entropy(p) - entropy_oracle(p)) < 1e-12);
}

TEST_CASE("entropy bounds and permutation invariance") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 2000; ++trial) {
    auto p = random_distribution(2 + static_cast<std::size_t>(trial % 30), rng);
    const double h = entropy(p);
    CHECK(h >= 0.0);
    CHECK(h <= std::log(static_cast<double>(p.size())) + 1e-12);
    CHECK(std::abs(h - entropy_oracle(p)) < 1e-12);
    std::shuffle(p.begin(), p.end(), rng);
    CHECK(std::abs(entropy(p) - h) < 1e-12);
  }
}

TEST_CASE("make_layout examples and errors") {
  const SubBlockLayout a = make_layout(60, 5);
  CHECK(a.block_count == 12);
  CHECK(a.block_size == 5);
  const SubBlockLayout b = make_layout(5, 5);
  CHECK(b.block_count == 1);
  const SubBlockLayout c = make_layout(20, 4);
  CHECK(c.block_count == 5);
  CHECK(c.begin(1) == 4);
  CHECK(c.end(1) == 8);
  CHECK(c.end(4) == 20);
  CHECK_THROWS_AS(make_layout(20, 3), ConfigError);
  CHECK_THROWS_AS(make_layout(20, 0), ConfigError);
}

TEST_CASE("base_uncertainty examples") {
  const SubBlockLayout twos = make_layout(4, 2);
  const std::vector<double> p = {0.05, 0.05, 0.8, 0.1};
  const BlockUncertainty u = base_uncertainty(p, twos);
  CHECK(u.block == 1);
  CHECK(std::abs(u.entropy - 0.34883209584303189) < 1e-12);
  CHECK(std::abs(block_entropies(p, twos)[0] - 0.69314718055994531) < 1e-12);

  const SubBlockLayout fives = make_layout(20, 5);
  const BlockUncertainty flat = base_uncertainty(std::vector<double>(20, 0.05), fives);
  CHECK(flat.block == 0);
  CHECK(std::abs(flat.entropy - std::log(5.0)) < 1e-12);

  std::vector<double> hot(20, 0.0);
  hot[13] = 1.0;
  const BlockUncertainty h = base_uncertainty(hot, fives);
  CHECK(h.block == 2);
  CHECK(h.entropy == 0.0);
}

TEST_CASE("zero-mass blocks count as maximal entropy and lose unless all are empty") {
  const SubBlockLayout twos = make_layout(4, 2);
  // Block 0 has no mass; block 1 is uniform (ln 2 as well) and must win.
  const std::vector<double> p = {0.0, 0.0, 0.5, 0.5};
  CHECK(block_entropies(p, twos)[0] == doctest::Approx(std::log(2.0)));
  CHECK(base_uncertainty(p, twos).block == 1);
  const std::vector<double> none = {0.0, 0.0, 0.0, 0.0};
  CHECK(base_uncertainty(none, twos).block == 0);
  CHECK_THROWS_AS(base_uncertainty(std::vector<double>(5, 0.2), twos), ShapeError);
}

TEST_CASE("base_uncertainty equals brute-force block enumeration") {
  std::mt19937_64 rng(60);
  const SubBlockLayout layout = make_layout(60, 5);
  for (int trial = 0; trial < 1000; ++trial) {
    auto p = random_distribution(60, rng);
    if (trial % 10 == 0) {
      // Sparse vectors exercise zero-mass blocks.
      for (std::size_t i = 0; i < 40; ++i) p[i] = 0.0;
    }
    const BlockUncertainty got = base_uncertainty(p, layout);
    const BlockUncertainty want = brute_force_blocks(p, 5);
    CHECK(got.entropy == want.entropy);
    CHECK(got.block == want.block);
  }
}

TEST_CASE("routing a single base model always picks it") {
  RouterOptions on;
  const std::vector<ProbVector> outs = {pv({0.2, 0.3, 0.5}, 0)};
  const UncertaintyRecord r = route_probabilities(outs, on);
  CHECK(r.winning_model == 0);
  CHECK(r.predicted_class == 2);
  CHECK_FALSE(r.winning_block.has_value());
  CHECK_THROWS_AS(route_probabilities(std::vector<ProbVector>{}, on), StateError);
}

TEST_CASE("two synthetic models: the confident one wins") {
  RouterOptions off;
  off.sub_results = false;
  const std::vector<ProbVector> outs = {pv({0.9, 0.1}, 0), pv({0.5, 0.5}, 2)};
  const UncertaintyRecord r = route_probabilities(outs, off);
  CHECK(r.winning_model == 0);
  CHECK(r.predicted_class == 0);
  CHECK(std::abs(r.model_entropy[0] - 0.32508297339144824) < 1e-12);
  CHECK(std::abs(r.model_entropy[1] - 0.69314718055994531) < 1e-12);
}

TEST_CASE("sub-results let a block-confident base beat an incremental model") {
  // Base is split between two blocks, each internally peaked; full entropy is
  // high but each block is confident.
  const std::vector<ProbVector> outs = {pv({0.45, 0.05, 0.45, 0.05}, 0), pv({0.8, 0.2}, 4)};
  RouterOptions on;
  RouterOptions off;
  off.sub_results = false;
  const UncertaintyRecord a = route_probabilities(outs, on);
  CHECK(a.winning_model == 0);
  REQUIRE(a.winning_block.has_value());
  CHECK(*a.winning_block == 0);
  CHECK(a.candidates.size() == 3);
  CHECK(route_probabilities(outs, off).winning_model == 1);
  CHECK(route_probabilities(outs, off).candidates.size() == 2);
}

TEST_CASE("ties go to the base model, then to the earliest session") {
  RouterOptions on;
  const std::vector<ProbVector> outs = {pv(std::vector<double>(4, 0.25), 0),
                                        pv({0.5, 0.5}, 4), pv({0.5, 0.5}, 6)};
  CHECK(route_probabilities(outs, on).winning_model == 0);
  const std::vector<ProbVector> incs = {pv(std::vector<double>(4, 0.25), 0), pv({0.9, 0.1}, 4),
                                        pv({0.1, 0.9}, 6)};
  const UncertaintyRecord r = route_probabilities(incs, on);
  CHECK(r.winning_model == 1);
  CHECK(r.predicted_class == 4);
}

TEST_CASE("prediction uses the full base output unless asked to stay in the block") {
  // Block 1 ([2,3]) is most certain, but the global argmax is class 0.
  const std::vector<ProbVector> outs = {pv({0.3, 0.28, 0.4, 0.02}, 0), pv({0.5, 0.5}, 4)};
  RouterOptions full;
  RouterOptions within;
  within.predict_within_block = true;
  const UncertaintyRecord a = route_probabilities(outs, full);
  REQUIRE(a.winning_block.has_value());
  CHECK(*a.winning_block == 1);
  CHECK(a.predicted_class == 2);
  const std::vector<ProbVector> outs2 = {pv({0.45, 0.43, 0.11, 0.01}, 0), pv({0.5, 0.5}, 4)};
  CHECK(*route_probabilities(outs2, full).winning_block == 1);
  CHECK(route_probabilities(outs2, full).predicted_class == 0);
  CHECK(route_probabilities(outs2, within).predicted_class == 2);
}

TEST_CASE("unequal incremental widths cannot be partitioned") {
  RouterOptions on;
  const std::vector<ProbVector> outs = {pv(std::vector<double>(4, 0.25), 0), pv({0.5, 0.5}, 4),
                                        pv({0.2, 0.3, 0.5}, 6)};
  CHECK_THROWS_AS(route_probabilities(outs, on), ConfigError);
  const std::vector<ProbVector> odd = {pv(std::vector<double>(5, 0.2), 0), pv({0.5, 0.5}, 5)};
  CHECK_THROWS_AS(route_probabilities(odd, on), ConfigError);
}

TEST_CASE("winner is unchanged when all uncertainties are rescaled") {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.1, 10.0);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<ProbVector> outs = {pv(random_distribution(20, rng), 0)};
    for (int t = 0; t < 4; ++t) outs.push_back(pv(random_distribution(5, rng), 20 + 5 * t));
    const UncertaintyRecord r = route_probabilities(outs, RouterOptions{});
    REQUIRE(*std::min_element(r.candidates.begin(), r.candidates.end()) ==
            r.model_entropy[r.winning_model]);

    const double k = u(rng);
    std::vector<double> scaled(r.candidates);
    for (auto& v : scaled) v *= k;
    const auto first_min = std::min_element(scaled.begin(), scaled.end()) - scaled.begin();
    const std::size_t blocks = 4;
    const std::size_t winner =
        static_cast<std::size_t>(first_min) < blocks ? 0 : static_cast<std::size_t>(first_min) - blocks + 1;
    CHECK(winner == r.winning_model);
  }
}

TEST_CASE("oracle sessions are routed perfectly with and without sub-results") {
  std::vector<std::vector<int>> sessions = {fscil::testing::iota_classes(0, 20)};
  for (int t = 0; t < 4; ++t) sessions.push_back(fscil::testing::iota_classes(20 + 5 * t, 5));
  const fscil::testing::OracleScorer scorer(sessions);
  for (bool sr : {true, false}) {
    RouterOptions opts;
    opts.sub_results = sr;
    for (int c = 0; c < 40; ++c) {
      const std::vector<double> x = {static_cast<double>(c), 0.0};
      const UncertaintyRecord r = route(x, scorer, opts);
      CHECK(r.winning_model == (c < 20 ? 0U : static_cast<std::size_t>((c - 20) / 5 + 1)));
      CHECK(r.predicted_class == c);
    }
  }
}
