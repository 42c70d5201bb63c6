#include <doctest.h>

#include "moldsynth/training.hpp"
#include "moldsynth/random.hpp"

#include <cmath>

using namespace moldsynth;

namespace {

/// Channel 0 carries the label (+1 Good, -1 NotGood), channels 1-3 are
/// noise and the rest are constant.
Dataset toy_dataset(int n, std::uint64_t seed) {
  Dataset d;
  d.name = "toy";
  RandomStream rng(seed);
  for (int i = 0; i < n; ++i) {
    CycleRecord r;
    r.cycle_id = "toy" + std::to_string(i);
    r.label = i % 2 == 0 ? Label::good() : Label::not_good();
    const Eigen::Index T = 4 + static_cast<Eigen::Index>(rng.below(5));
    r.samples.resize(T, kNumFeatures);
    r.samples.setConstant(3.0);
    for (Eigen::Index t = 0; t < T; ++t) {
      for (Eigen::Index j = 1; j < 4; ++j) r.samples(t, j) = rng.normal();
    }
    r.samples.col(0).setConstant(r.label.is_good() ? 1.0 : -1.0);
    d.records.push_back(std::move(r));
  }
  return d;
}

ModelConfig toy_config() {
  ModelConfig c;
  c.units = {8, 8};
  c.learning_rate = 0.02;
  c.batch_size = 8;
  c.epochs = 15;
  c.dropout_inner = 0.0;
  c.dropout_final = 0.0;
  return c;
}

}  // namespace

TEST_CASE("standardizer fits z-scores and zeroes constant channels") {
  Dataset d;
  CycleRecord r;
  r.samples = Mat::Zero(4, kNumFeatures);
  r.samples.col(0) << 1, 2, 3, 4;
  r.samples.col(1).setConstant(7.0);
  d.records.push_back(r);
  const auto st = Standardizer::fit(d);
  CHECK(st.mean[0] == 2.5);
  CHECK(st.scale[0] == doctest::Approx(std::sqrt(1.25)).epsilon(1e-15));
  CHECK(st.scale[1] == 0.0);
  const Mat z = st.apply(r.samples);
  CHECK(z.col(1).isZero());
  CHECK(z.col(0).mean() == doctest::Approx(0.0).epsilon(1e-15));
  CHECK((z.col(0).array().square().mean()) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(Standardizer::identity(kNumFeatures).apply(r.samples) == r.samples);
  CHECK_THROWS_AS(Standardizer::fit(Dataset{}), DataError);
}

TEST_CASE("training separates a linearly separable toy problem") {
  const auto train_set = toy_dataset(40, 1);
  const auto val_set = toy_dataset(20, 2);
  const auto res = train(toy_config(), train_set, val_set, 11);
  REQUIRE(res.history.size() == 15);
  CHECK(res.history.back().train_accuracy == 1.0);
  CHECK(res.history.back().val_accuracy == 1.0);
  CHECK(res.history.back().train_loss < res.history.front().train_loss);

  // predict reproduces the final-epoch scores and agrees with the history.
  const auto vs = predict(res.model, val_set);
  CHECK(vs == res.final_val_scores);
  CHECK(accuracy(vs, labels_of(val_set)) == res.history.back().val_accuracy);
  CHECK(mse(vs, labels_of(val_set)) == res.history.back().val_loss);
  for (double s : vs) {
    CHECK(s > 0.0);
    CHECK(s < 1.0);
  }
}

TEST_CASE("training is deterministic in the seed") {
  auto cfg = toy_config();
  cfg.epochs = 3;
  const auto train_set = toy_dataset(24, 3);
  const auto val_set = toy_dataset(8, 4);
  const auto a = train(cfg, train_set, val_set, 5);
  const auto b = train(cfg, train_set, val_set, 5);
  const auto c = train(cfg, train_set, val_set, 6);
  CHECK(a.model.params.flat() == b.model.params.flat());
  CHECK(a.final_val_scores == b.final_val_scores);
  CHECK_FALSE(a.model.params.flat() == c.model.params.flat());
  CHECK(a.model.config.seed == 5);
}

TEST_CASE("training reports errors and honours cancellation") {
  auto cfg = toy_config();
  cfg.epochs = 2;
  const auto d = toy_dataset(8, 5);
  CHECK_THROWS_AS(train(cfg, Dataset{}, d, 1), DataError);
  CHECK_THROWS_AS(train(cfg, d, Dataset{}, 1), DataError);
  auto narrow = d;
  narrow.records[0].samples = Mat::Zero(3, 5);
  CHECK_THROWS_AS(train(cfg, narrow, d, 1), DataError);

  TrainOptions opts;
  int calls = 0;
  opts.should_stop = [&] { return ++calls > 1; };
  CHECK_THROWS_AS(train(cfg, d, d, 1, opts), CancelledError);

  int epochs_seen = 0;
  TrainOptions cb;
  cb.on_epoch = [&](int e, const EpochMetrics&) { CHECK(e == epochs_seen++); };
  train(cfg, d, d, 1, cb);
  CHECK(epochs_seen == 2);
}
