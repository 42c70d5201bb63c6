#pragma once

#include "moldsynth/core_types.hpp"
#include "moldsynth/lstm.hpp"
#include "moldsynth/metrics.hpp"

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace moldsynth {

/// Scalar used for training and prediction.
using TrainScalar = float;

/// Per-channel z-score fitted on training rows. Channels with zero variance
/// map to 0.
struct Standardizer {
  Vec mean;
  Vec scale;  // standard deviation; 0 marks a constant channel

  static Standardizer identity(int features);
  static Standardizer fit(const Dataset& train, int features = kNumFeatures);

  Mat apply(const Mat& samples) const;
  bool operator==(const Standardizer& o) const;
};

struct EpochMetrics {
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
};

using TrainingHistory = std::vector<EpochMetrics>;

struct Model {
  ModelConfig config;
  std::string schema_fingerprint;
  Standardizer standardizer;
  LstmParams<TrainScalar> params;
};

struct TrainOptions {
  /// Polled once per batch; returning true aborts with CancelledError.
  std::function<bool()> should_stop;
  /// Called after each epoch with (epoch index, metrics).
  std::function<void(int, const EpochMetrics&)> on_epoch;
};

struct TrainResult {
  Model model;
  TrainingHistory history;
  std::vector<double> final_train_scores;
  std::vector<double> final_val_scores;
};

/// Seeded shuffle per epoch, mini-batches, BPTT and Adam, then eval-mode
/// metrics on both sets after every epoch. Deterministic in `seed`.
TrainResult train(const ModelConfig& config, const Dataset& train_set, const Dataset& val_set, std::uint64_t seed,
                  const TrainOptions& options = {});

/// Eval-mode scores in record order.
std::vector<double> predict(const Model& model, const Dataset& dataset);

/// Scores for already-standardized sequences, batched in order.
std::vector<double> score_sequences(const LstmParams<TrainScalar>& params, std::span<const Mat> sequences,
                                    int batch_size);

std::vector<Label> labels_of(const Dataset& dataset);

}  // namespace moldsynth
