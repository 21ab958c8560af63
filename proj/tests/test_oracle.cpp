#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "condlab/model.hpp"
#include "condlab/oracle.hpp"
#include "condlab/partition.hpp"

using namespace condlab;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {
PerturbationParams pert(double theta, double gamma, double kappa) {
  return PerturbationParams{theta, gamma, kappa, nullptr, 0.0};
}
}  // namespace

TEST_CASE("state enumeration visits every composition exactly once, in order") {
  std::vector<std::vector<i64>> seen;
  enumerate_states(4, 6, [&](const std::vector<i64>& eta) { seen.push_back(eta); });
  CHECK(seen.size() == 84);  // C(9,3)
  CHECK_THAT(log_state_count(4, 6), WithinRel(std::log(84.0), 1e-13));
  CHECK(seen.front() == std::vector<i64>{0, 0, 0, 6});
  CHECK(seen.back() == std::vector<i64>{6, 0, 0, 0});
  for (const auto& eta : seen) {
    i64 total = 0;
    for (i64 v : eta) total += v;
    REQUIRE(total == 6);
  }
  for (size_t i = 1; i < seen.size(); ++i) REQUIRE(seen[i - 1] < seen[i]);  // strict lex order
  CHECK_THROWS_AS(enumerate_states(20, 20, [](const std::vector<i64>&) {}),
                  std::invalid_argument);  // budget
  CHECK_THROWS_AS(enumerate_states(0, 3, [](const std::vector<i64>&) {}), std::invalid_argument);
}

TEST_CASE("two-site single-particle system is exactly symmetric") {
  // states (0,1) and (1,0) carry equal weight regardless of the weight family
  ModelSpec m(BulkWeights::geometric(0.5), pert(0.3, 1.0, 1.0), 2, 1);
  BruteMeasure bm = brute_measure(m);
  CHECK_THAT(bm.marginal[0], WithinAbs(0.5, 1e-15));
  CHECK_THAT(bm.marginal[1], WithinAbs(0.5, 1e-15));
  CHECK_THAT(bm.sb_first[1], WithinAbs(1.0, 1e-15));
  CHECK(bm.sb_first[0] == 0.0);
  // after the single particle is taken, the second site is the empty one
  CHECK_THAT(bm.sb_pair[1][0], WithinAbs(1.0, 1e-15));
}

TEST_CASE("brute-force marginals and size-biased laws are proper distributions") {
  for (double kappa : {0.0, 0.5}) {
    ModelSpec m(BulkWeights::geometric(0.5), pert(0.1, 1.0, kappa), 4, 7);
    BruteMeasure bm = brute_measure(m);
    double marg = 0.0, first = 0.0, pair = 0.0;
    for (double v : bm.marginal) marg += v;
    for (double v : bm.sb_first) first += v;
    for (const auto& row : bm.sb_pair)
      for (double v : row) pair += v;
    CHECK_THAT(marg, WithinAbs(1.0, 1e-12));
    CHECK_THAT(first, WithinAbs(1.0, 1e-12));
    CHECK_THAT(pair, WithinAbs(1.0, 1e-12));
    // pair marginalizes to the first law
    for (i64 a = 0; a <= 7; ++a) {
      double row = 0.0;
      for (double v : bm.sb_pair[static_cast<size_t>(a)]) row += v;
      CHECK_THAT(row, WithinAbs(bm.sb_first[static_cast<size_t>(a)], 1e-12));
    }
  }
}

TEST_CASE("enumeration and convolution agree on a model with a nuisance term") {
  auto delta = [](i64 n) { return n % 2 == 0 ? 0.3 : -0.3; };
  ModelSpec m(BulkWeights::table({2.0, 1.0, 0.7}, 0.45),
              PerturbationParams{0.2, 1.5, 0.5, delta, 0.3}, 5, 6);
  BruteMeasure bm = brute_measure(m);
  LogPartitionTable t = build_table(m);
  CHECK_THAT(t.at(5, 6), WithinRel(bm.log_z, 1e-12));
}

TEST_CASE("empty systems degenerate cleanly") {
  ModelSpec m(BulkWeights::geometric(0.5), pert(0.1, 1.0, 0.0), 3, 0);
  BruteMeasure bm = brute_measure(m);
  CHECK_THAT(bm.log_z, WithinRel(3.0 * m.log_perturbed_pmf(0), 1e-14));
  CHECK(bm.marginal[0] == 1.0);
  CHECK(bm.sb_first[0] == 1.0);
  CHECK(bm.sb_pair[0][0] == 1.0);
}

TEST_CASE("grand-canonical equivalence distance shrinks with system size") {
  BulkWeights bulk = BulkWeights::geometric(0.5);
  PerturbationParams p = pert(0.1, 1.0, 0.0);

  auto super = brute_equivalence_check(bulk, p, 2.0, {4, 6, 8});
  REQUIRE(super.size() == 3);
  CHECK(super[0].N == 8);
  CHECK_THAT(super[0].tv, WithinAbs(0.1943, 2e-3));
  CHECK_THAT(super[1].tv, WithinAbs(0.1461, 2e-3));
  CHECK_THAT(super[2].tv, WithinAbs(0.1180, 2e-3));
  CHECK(super[0].tv > super[1].tv);
  CHECK(super[1].tv > super[2].tv);

  auto sub = brute_equivalence_check(bulk, p, 0.5, {4, 6, 8});
  CHECK_THAT(sub[0].tv, WithinAbs(0.1013, 2e-3));
  CHECK(sub[0].tv > sub[1].tv);
  CHECK(sub[1].tv > sub[2].tv);

  auto zero = brute_equivalence_check(bulk, p, 0.0, {2, 4});
  CHECK(zero[0].tv < 1e-14);
  CHECK(zero[1].tv < 1e-14);

  CHECK_THROWS_AS(brute_equivalence_check(bulk, p, -1.0, {4}), std::invalid_argument);
}
