#include "moldsynth/training.hpp"

#include <cmath>

namespace moldsynth {

namespace {

void check_schema(const Dataset& d, int features) {
  for (const auto& r : d.records) {
    if (r.samples.cols() != features) {
      throw DataError("dataset '" + d.name + "': record " + r.cycle_id + " has " + std::to_string(r.samples.cols()) +
                      " columns, model expects " + std::to_string(features));
    }
  }
}

std::vector<Mat> transform_all(const Standardizer& st, const Dataset& d) {
  std::vector<Mat> out;
  out.reserve(d.size());
  for (const auto& r : d.records) out.push_back(st.apply(r.samples));
  return out;
}

PaddedBatch<TrainScalar> make_batch(std::span<const Mat> xs, std::span<const double> targets,
                                    std::span<const size_t> idx) {
  std::vector<const Mat*> ptrs;
  std::vector<double> tg;
  ptrs.reserve(idx.size());
  tg.reserve(idx.size());
  for (size_t i : idx) {
    ptrs.push_back(&xs[i]);
    tg.push_back(targets[i]);
  }
  return PaddedBatch<TrainScalar>::from_sequences(ptrs, tg);
}

}  // namespace

Standardizer Standardizer::identity(int features) {
  return {Vec::Zero(features), Vec::Ones(features)};
}

Standardizer Standardizer::fit(const Dataset& train, int features) {
  if (train.empty()) throw DataError("standardizer: empty training set");
  Vec sum = Vec::Zero(features);
  double rows = 0.0;
  for (const auto& r : train.records) {
    sum += r.samples.colwise().sum().transpose();
    rows += static_cast<double>(r.samples.rows());
  }
  Standardizer s;
  s.mean = sum / rows;
  Vec ss = Vec::Zero(features);
  for (const auto& r : train.records) {
    ss += (r.samples.rowwise() - s.mean.transpose()).array().square().matrix().colwise().sum().transpose();
  }
  s.scale = (ss / rows).cwiseSqrt();
  // Constant channels (up to rounding in the mean) standardize to zero.
  for (Eigen::Index j = 0; j < features; ++j) {
    if (s.scale[j] <= 1e-12 * std::max(1.0, std::abs(s.mean[j]))) s.scale[j] = 0.0;
  }
  return s;
}

Mat Standardizer::apply(const Mat& samples) const {
  if (samples.cols() != mean.size()) throw DataError("standardizer: column count mismatch");
  Mat out(samples.rows(), samples.cols());
  for (Eigen::Index j = 0; j < samples.cols(); ++j) {
    if (scale[j] == 0.0) {
      out.col(j).setZero();
    } else {
      out.col(j) = (samples.col(j).array() - mean[j]) / scale[j];
    }
  }
  return out;
}

bool Standardizer::operator==(const Standardizer& o) const { return mean == o.mean && scale == o.scale; }

std::vector<Label> labels_of(const Dataset& dataset) {
  std::vector<Label> out;
  out.reserve(dataset.size());
  for (const auto& r : dataset.records) out.push_back(r.label);
  return out;
}

std::vector<double> score_sequences(const LstmParams<TrainScalar>& params, std::span<const Mat> sequences,
                                    int batch_size) {
  std::vector<double> scores;
  scores.reserve(sequences.size());
  const std::vector<double> dummy(sequences.size(), 0.0);
  std::vector<size_t> idx;
  for (size_t start = 0; start < sequences.size(); start += static_cast<size_t>(batch_size)) {
    const size_t end = std::min(sequences.size(), start + static_cast<size_t>(batch_size));
    idx.clear();
    for (size_t i = start; i < end; ++i) idx.push_back(i);
    const auto batch = make_batch(sequences, dummy, idx);
    const auto s = forward(params, batch, false, 0, DropoutRates{});
    for (Eigen::Index k = 0; k < s.size(); ++k) scores.push_back(static_cast<double>(s[k]));
  }
  return scores;
}

std::vector<double> predict(const Model& model, const Dataset& dataset) {
  check_schema(dataset, model.config.input_dim);
  const auto xs = transform_all(model.standardizer, dataset);
  return score_sequences(model.params, xs, model.config.batch_size);
}

TrainResult train(const ModelConfig& config, const Dataset& train_set, const Dataset& val_set, std::uint64_t seed,
                  const TrainOptions& options) {
  config.validate();
  if (train_set.empty()) throw DataError("train: empty training set");
  if (val_set.empty()) throw DataError("train: empty validation set");
  check_schema(train_set, config.input_dim);
  check_schema(val_set, config.input_dim);

  TrainResult result;
  Model& model = result.model;
  model.config = config;
  model.config.seed = seed;
  model.schema_fingerprint = FeatureSchema::canonical().fingerprint();
  model.standardizer =
      config.standardize ? Standardizer::fit(train_set, config.input_dim) : Standardizer::identity(config.input_dim);
  model.params = init_params<TrainScalar>(config, mix64(seed, 1));

  const auto train_x = transform_all(model.standardizer, train_set);
  const auto val_x = transform_all(model.standardizer, val_set);
  std::vector<double> train_targets;
  for (const auto& r : train_set.records) train_targets.push_back(r.label.target());
  const auto train_labels = labels_of(train_set);
  const auto val_labels = labels_of(val_set);

  const DropoutRates rates = DropoutRates::from(config);
  const AdamHyper hp = AdamHyper::from(config);
  AdamState<TrainScalar> adam(model.params.flat().size());
  long long step = 0;
  const size_t n = train_set.size();
  const auto bs = static_cast<size_t>(config.batch_size);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    RandomStream shuffle_rng(mix64(seed, 2), static_cast<std::uint64_t>(epoch));
    const auto order = shuffle_rng.permutation(n);
    for (size_t start = 0, bi = 0; start < n; start += bs, ++bi) {
      if (options.should_stop && options.should_stop()) throw CancelledError("training cancelled");
      const size_t end = std::min(n, start + bs);
      const auto batch = make_batch(train_x, train_targets, std::span<const size_t>(order).subspan(start, end - start));
      const std::uint64_t dropout_seed = mix64(seed, 3, (static_cast<std::uint64_t>(epoch) << 32) | bi);
      const auto g = backward(model.params, batch, dropout_seed, rates);
      if (!std::isfinite(g.loss) || !g.grads.all_finite()) {
        throw Error("train: non-finite loss or gradient at epoch " + std::to_string(epoch) + ", batch " +
                    std::to_string(bi));
      }
      adam_step(model.params, g.grads, adam, hp, ++step);
      if (!model.params.all_finite()) {
        throw Error("train: non-finite parameters after epoch " + std::to_string(epoch) + ", batch " +
                    std::to_string(bi));
      }
    }

    result.final_train_scores = score_sequences(model.params, train_x, config.batch_size);
    result.final_val_scores = score_sequences(model.params, val_x, config.batch_size);
    EpochMetrics m;
    m.train_loss = mse(result.final_train_scores, train_labels);
    m.train_accuracy = accuracy(result.final_train_scores, train_labels);
    m.val_loss = mse(result.final_val_scores, val_labels);
    m.val_accuracy = accuracy(result.final_val_scores, val_labels);
    result.history.push_back(m);
    if (options.on_epoch) options.on_epoch(epoch, m);
  }
  return result;
}

}  // namespace moldsynth
