#include <doctest.h>

#include "moldsynth/metrics.hpp"
#include "moldsynth/random.hpp"
#include "oracles.hpp"

#include <cmath>

using namespace moldsynth;

namespace {

const Label G = Label::good();
const Label N = Label::not_good();

}  // namespace

TEST_CASE("accuracy and confusion counts") {
  const std::vector<double> s{0.9, 0.5, 0.49, 0.1};
  const std::vector<Label> y{G, N, G, N};
  const auto c = confusion(s, y);
  CHECK(c.tp == 1);
  CHECK(c.fp == 1);  // 0.5 predicts Good
  CHECK(c.fn == 1);
  CHECK(c.tn == 1);
  CHECK(accuracy(s, y) == 0.5);
  CHECK(accuracy(std::vector<double>{0.7, 0.2}, std::vector<Label>{G, N}) == 1.0);
  CHECK_THROWS_AS(accuracy(std::vector<double>{}, std::vector<Label>{}), DataError);
  CHECK_THROWS_AS(accuracy(std::vector<double>{0.1}, std::vector<Label>{G, N}), DataError);
}

TEST_CASE("f1 examples") {
  // TP=1, FP=1, FN=1: 2 / (2 + 1 + 1).
  const std::vector<double> s{0.9, 0.8, 0.1, 0.2};
  const std::vector<Label> y{G, N, G, N};
  CHECK(f1(s, y) == 0.5);
  // No positives predicted or present.
  CHECK(f1(std::vector<double>{0.1, 0.2}, std::vector<Label>{N, N}) == 0.0);
  CHECK(f1(std::vector<double>{0.9, 0.7}, std::vector<Label>{G, G}) == 1.0);
}

TEST_CASE("mse examples") {
  CHECK(mse(std::vector<double>{1.0, 0.0}, std::vector<Label>{G, N}) == 0.0);
  CHECK(mse(std::vector<double>{0.5, 0.5}, std::vector<Label>{G, N}) == 0.25);
  CHECK(mse(std::vector<double>{0.0}, std::vector<Label>{G}) == 1.0);
}

TEST_CASE("auc matches the pairwise oracle with ties") {
  RandomStream rng(2024);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> s;
    std::vector<Label> y;
    for (int i = 0; i < 1000; ++i) {
      // Coarse grid forces many ties; label correlates with score.
      const double v = static_cast<double>(rng.below(40)) / 40.0;
      s.push_back(v);
      y.push_back(rng.uniform() < 0.3 + 0.4 * v ? G : N);
    }
    CHECK(std::abs(auc_roc(s, y) - oracle::pairwise_auc(s, y)) <= 1e-12);
  }
}

TEST_CASE("auc is invariant to monotone transforms and flips with labels") {
  RandomStream rng(5);
  std::vector<double> s, cubed, flipped;
  std::vector<Label> y, swapped;
  for (int i = 0; i < 500; ++i) {
    double v = rng.uniform();
    if (v == 0.5) v = 0.25;
    s.push_back(v);
    cubed.push_back(v * v * v);
    flipped.push_back(1.0 - v);
    const Label l = rng.uniform() < v ? G : N;
    y.push_back(l);
    swapped.push_back(l.is_good() ? N : G);
  }
  const double a = auc_roc(s, y);
  CHECK(std::abs(auc_roc(cubed, y) - a) <= 1e-12);
  CHECK(std::abs(auc_roc(flipped, swapped) - a) <= 1e-12);
  CHECK(std::abs(auc_roc(s, swapped) - (1.0 - a)) <= 1e-12);
}

TEST_CASE("auc edge cases") {
  CHECK(auc_roc(std::vector<double>{0.1, 0.9}, std::vector<Label>{N, G}) == 1.0);
  CHECK(auc_roc(std::vector<double>{0.9, 0.1}, std::vector<Label>{N, G}) == 0.0);
  CHECK(auc_roc(std::vector<double>{0.4, 0.4}, std::vector<Label>{N, G}) == 0.5);
  CHECK_THROWS_AS(auc_roc(std::vector<double>{0.1, 0.9}, std::vector<Label>{G, G}), DataError);
  const auto r = evaluate(std::vector<double>{0.1, 0.9}, std::vector<Label>{G, G});
  CHECK(std::isnan(r.auc_roc));
  CHECK(r.accuracy == 0.5);
}

TEST_CASE("aggregate_runs uses population statistics") {
  EvalResult a, b;
  a.accuracy = 0.8;
  b.accuracy = 1.0;
  a.loss = 0.1;
  b.loss = 0.3;
  a.f1 = b.f1 = 0.5;
  a.auc_roc = 0.6;
  b.auc_roc = 0.8;
  const std::vector<EvalResult> runs{a, b};
  const auto agg = aggregate_runs(runs);
  CHECK(agg.runs == 2);
  CHECK(agg.mean.accuracy == doctest::Approx(0.9).epsilon(1e-15));
  CHECK(agg.stddev.accuracy == doctest::Approx(0.1).epsilon(1e-14));
  CHECK(agg.mean.loss == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(agg.stddev.f1 == 0.0);
  CHECK(agg.mean.auc_roc == doctest::Approx(0.7).epsilon(1e-15));

  const auto ms = mean_std(std::vector<double>{2, 4, 4, 4, 5, 5, 7, 9});
  CHECK(ms.mean == 5.0);
  CHECK(ms.stddev == 2.0);
  CHECK_THROWS_AS(aggregate_runs(std::vector<EvalResult>{}), DataError);
}
