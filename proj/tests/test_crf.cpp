#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "cmlid/crf.hpp"
#include "support.hpp"

using namespace cmlid;

namespace {

struct RandomCrf {
  Tensor emissions;
  Tensor transitions;
};

RandomCrf random_crf(Rng& rng, std::size_t T, std::size_t L) {
  return {testing::random_tensor({T, L}, rng, -3.0, 3.0),
          testing::random_tensor({L + 2, L + 2}, rng, -2.0, 2.0)};
}

}  // namespace

TEST_CASE("crf score of a hand-worked path") {
  // Two labels, two steps.
  const Tensor e = Tensor::checked({2, 2}, {1.0, 2.0, 0.5, -1.0});
  Tensor tr = crf::make_transitions(2);
  tr.at(2, 0) = 0.1;   // START -> 0
  tr.at(0, 1) = 0.2;   // 0 -> 1
  tr.at(1, 3) = 0.3;   // 1 -> STOP
  const std::vector<int> path{0, 1};
  CHECK(crf::score(e, tr, path) == doctest::Approx(0.1 + 1.0 + 0.2 - 1.0 + 0.3));
}

TEST_CASE("crf agrees with enumeration") {
  Rng rng(2024);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t T = 1 + rng.below(6);
    const std::size_t L = 1 + rng.below(3);
    const RandomCrf c = random_crf(rng, T, L);
    const auto bf = crf::brute_force(c.emissions, c.transitions);
    CHECK(std::abs(crf::log_partition(c.emissions, c.transitions) - bf.log_z) < 1e-8);

    const crf::Decoded best = crf::viterbi(c.emissions, c.transitions);
    CHECK(best.path == bf.best_path);
    CHECK(best.score == doctest::Approx(bf.best_score).epsilon(1e-12));

    double total = 0.0;
    for (double s : bf.scores) total += std::exp(s - bf.log_z);
    CHECK(std::abs(total - 1.0) < 1e-8);

    // Marginals against enumeration.
    const crf::Posteriors post = crf::posteriors(c.emissions, c.transitions);
    for (std::size_t t = 0; t < T; ++t) {
      double row = 0.0;
      for (std::size_t l = 0; l < L; ++l) {
        double m = 0.0;
        for (std::size_t p = 0; p < bf.paths.size(); ++p) {
          if (bf.paths[p][t] == static_cast<int>(l)) m += std::exp(bf.scores[p] - bf.log_z);
        }
        CHECK(std::abs(post.unary.at(t, l) - m) < 1e-9);
        row += post.unary.at(t, l);
      }
      CHECK(std::abs(row - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("crf nll gradient and bounds") {
  const auto r = testing::check_crf_nll(77);
  CHECK(r.report.max_relative_error < 1e-4);

  Rng rng(3);
  const RandomCrf c = random_crf(rng, 4, 2);
  const std::vector<int> gold{0, 1, 1, 0};
  const auto nll = crf::nll(c.emissions, c.transitions, gold);
  CHECK(nll.loss >= 0.0);
  CHECK(nll.loss == doctest::Approx(crf::log_partition(c.emissions, c.transitions) -
                                    crf::score(c.emissions, c.transitions, gold)));
}

TEST_CASE("crf edge cases") {
  SUBCASE("single token reduces to softmax with boundary terms") {
    const Tensor e = Tensor::checked({1, 2}, {0.3, -0.7});
    const Tensor tr = crf::make_transitions(2);
    CHECK(crf::log_partition(e, tr) ==
          doctest::Approx(std::log(std::exp(0.3) + std::exp(-0.7))));
    CHECK(crf::viterbi(e, tr).path == std::vector<int>{0});
  }
  SUBCASE("ties go to the lower label") {
    const Tensor e({3, 2}, 0.0);
    CHECK(crf::viterbi(e, crf::make_transitions(2)).path == std::vector<int>{0, 0, 0});
  }
  SUBCASE("large emissions stay finite") {
    const Tensor e = Tensor::checked({3, 2}, {800.0, -800.0, 750.0, 790.0, -900.0, 900.0});
    const double z = crf::log_partition(e, crf::make_transitions(2));
    CHECK(std::isfinite(z));
    CHECK(z >= 800.0 + 790.0 + 900.0);
  }
  SUBCASE("bad shapes") {
    CHECK_THROWS_AS(crf::log_partition(Tensor({3, 2}), crf::make_transitions(3)), ShapeError);
    CHECK_THROWS(crf::log_partition(Tensor({0, 2}), crf::make_transitions(2)));
    const std::vector<int> bad{0, 5};
    CHECK_THROWS(crf::score(Tensor({2, 2}), crf::make_transitions(2), bad));
  }
  SUBCASE("enumeration cap") {
    CHECK_THROWS_AS(crf::brute_force(Tensor({10, 3}), crf::make_transitions(3)),
                    std::length_error);
  }
}

TEST_CASE("crf examples") {
  const Tensor zero2 = crf::make_transitions(2);
  const Tensor e1 = Tensor::checked({1, 2}, {0.4, 1.1});
  const std::vector<int> y1{1};
  CHECK(crf::score(e1, zero2, y1) == 1.1);
  const std::vector<int> y3{0, 1, 0};
  CHECK(crf::score(Tensor({3, 2}), zero2, y3) == 0.0);

  for (std::size_t T : {1u, 3u, 5u}) {
    for (std::size_t L : {1u, 2u, 3u}) {
      CHECK(crf::log_partition(Tensor({T, L}), crf::make_transitions(L)) ==
            doctest::Approx(T * std::log(static_cast<double>(L))).epsilon(1e-14));
    }
  }
  const std::vector<int> gold{0, 1};
  CHECK(crf::nll(Tensor({2, 2}), zero2, gold).loss == doctest::Approx(2 * std::log(2.0)));
  const Tensor strong = Tensor::checked({2, 2}, {60.0, -60.0, -60.0, 60.0});
  CHECK(crf::nll(strong, zero2, gold).loss < 1e-40);

  Rng rng(6);
  const Tensor e = testing::random_tensor({6, 3}, rng);
  const auto path = crf::viterbi(e, crf::make_transitions(3)).path;
  for (std::size_t t = 0; t < 6; ++t) {
    const auto row = e.row(t);
    CHECK(path[t] == std::max_element(row.begin(), row.end()) - row.begin());
  }
  Tensor boundary = crf::make_transitions(2);
  boundary.at(2, 1) = 5.0;  // START -> 1
  CHECK(crf::viterbi(Tensor::checked({1, 2}, {1.0, 0.0}), boundary).path == std::vector<int>{1});
}
