#pragma once

#include "moldsynth/core_types.hpp"

#include <span>
#include <vector>

namespace moldsynth {

/// Good is the positive class; a score equal to the threshold predicts Good.
inline constexpr double kDecisionThreshold = 0.5;

struct Confusion {
  long long tp = 0;
  long long fp = 0;
  long long tn = 0;
  long long fn = 0;

  long long total() const { return tp + fp + tn + fn; }
  bool operator==(const Confusion&) const = default;
};

struct EvalResult {
  double accuracy = 0.0;
  double loss = 0.0;
  double f1 = 0.0;
  double auc_roc = 0.0;  // NaN when only one class is present
  Confusion confusion;
};

Confusion confusion(std::span<const double> scores, std::span<const Label> labels,
                    double threshold = kDecisionThreshold);

double accuracy(std::span<const double> scores, std::span<const Label> labels, double threshold = kDecisionThreshold);

/// 2TP / (2TP + FP + FN); 0 when the denominator is 0.
double f1(std::span<const double> scores, std::span<const Label> labels, double threshold = kDecisionThreshold);

/// Mean squared error against the 1.0 / 0.0 targets.
double mse(std::span<const double> scores, std::span<const Label> labels);

/// Rank-sum (Mann-Whitney) AUC with midranks for ties. Throws DataError
/// unless both classes are present.
double auc_roc(std::span<const double> scores, std::span<const Label> labels);

/// All four metrics plus the confusion counts. auc_roc is NaN for
/// single-class inputs instead of throwing.
EvalResult evaluate(std::span<const double> scores, std::span<const Label> labels);

struct AggregateResult {
  EvalResult mean;
  EvalResult stddev;  // population standard deviation; confusion left zero
  size_t runs = 0;
};

AggregateResult aggregate_runs(std::span<const EvalResult> results);

/// Population mean and standard deviation of a series.
struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;
};
MeanStd mean_std(std::span<const double> values);

}  // namespace moldsynth
