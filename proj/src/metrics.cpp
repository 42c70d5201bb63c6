#include "moldsynth/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace moldsynth {

namespace {

void check_inputs(std::span<const double> scores, std::span<const Label> labels, const char* what) {
  if (scores.empty()) throw DataError(std::string(what) + ": empty input");
  if (scores.size() != labels.size()) throw DataError(std::string(what) + ": scores/labels length mismatch");
}

}  // namespace

Confusion confusion(std::span<const double> scores, std::span<const Label> labels, double threshold) {
  check_inputs(scores, labels, "confusion");
  Confusion c;
  for (size_t i = 0; i < scores.size(); ++i) {
    const bool pred_good = scores[i] >= threshold;
    const bool good = labels[i].is_good();
    if (pred_good && good) ++c.tp;
    else if (pred_good && !good) ++c.fp;
    else if (!pred_good && good) ++c.fn;
    else ++c.tn;
  }
  return c;
}

double accuracy(std::span<const double> scores, std::span<const Label> labels, double threshold) {
  const Confusion c = confusion(scores, labels, threshold);
  return static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
}

double f1(std::span<const double> scores, std::span<const Label> labels, double threshold) {
  const Confusion c = confusion(scores, labels, threshold);
  const long long denom = 2 * c.tp + c.fp + c.fn;
  return denom == 0 ? 0.0 : static_cast<double>(2 * c.tp) / static_cast<double>(denom);
}

double mse(std::span<const double> scores, std::span<const Label> labels) {
  check_inputs(scores, labels, "mse");
  double sum = 0.0;
  for (size_t i = 0; i < scores.size(); ++i) {
    const double d = scores[i] - labels[i].target();
    sum += d * d;
  }
  return sum / static_cast<double>(scores.size());
}

double auc_roc(std::span<const double> scores, std::span<const Label> labels) {
  check_inputs(scores, labels, "auc_roc");
  const size_t n = scores.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return scores[a] < scores[b]; });

  // Sum of midranks (1-based, doubled to stay integral) over positives.
  long long doubled_rank_sum = 0;
  long long n_pos = 0;
  for (size_t i = 0; i < n;) {
    size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const long long doubled_mid = static_cast<long long>(i + 1 + j + 1);
    for (size_t k = i; k <= j; ++k) {
      if (labels[order[k]].is_good()) {
        doubled_rank_sum += doubled_mid;
        ++n_pos;
      }
    }
    i = j + 1;
  }
  const long long n_neg = static_cast<long long>(n) - n_pos;
  if (n_pos == 0 || n_neg == 0) throw DataError("auc_roc: undefined for single-class input");
  // U = R_pos - n_pos(n_pos+1)/2, all doubled.
  const long long doubled_u = doubled_rank_sum - n_pos * (n_pos + 1);
  return static_cast<double>(doubled_u) / (2.0 * static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

EvalResult evaluate(std::span<const double> scores, std::span<const Label> labels) {
  EvalResult r;
  r.confusion = confusion(scores, labels);
  r.accuracy = static_cast<double>(r.confusion.tp + r.confusion.tn) / static_cast<double>(r.confusion.total());
  const long long denom = 2 * r.confusion.tp + r.confusion.fp + r.confusion.fn;
  r.f1 = denom == 0 ? 0.0 : static_cast<double>(2 * r.confusion.tp) / static_cast<double>(denom);
  r.loss = mse(scores, labels);
  const bool has_pos = r.confusion.tp + r.confusion.fn > 0;
  const bool has_neg = r.confusion.tn + r.confusion.fp > 0;
  r.auc_roc = has_pos && has_neg ? auc_roc(scores, labels) : std::numeric_limits<double>::quiet_NaN();
  return r;
}

MeanStd mean_std(std::span<const double> values) {
  if (values.empty()) throw DataError("mean_std: empty input");
  const double n = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / n)};
}

AggregateResult aggregate_runs(std::span<const EvalResult> results) {
  if (results.empty()) throw DataError("aggregate_runs: no results");
  AggregateResult out;
  out.runs = results.size();
  auto field = [&](auto get, double& mean_out, double& std_out) {
    std::vector<double> xs;
    xs.reserve(results.size());
    for (const auto& r : results) xs.push_back(get(r));
    const MeanStd ms = mean_std(xs);
    mean_out = ms.mean;
    std_out = ms.stddev;
  };
  field([](const EvalResult& r) { return r.accuracy; }, out.mean.accuracy, out.stddev.accuracy);
  field([](const EvalResult& r) { return r.loss; }, out.mean.loss, out.stddev.loss);
  field([](const EvalResult& r) { return r.f1; }, out.mean.f1, out.stddev.f1);
  field([](const EvalResult& r) { return r.auc_roc; }, out.mean.auc_roc, out.stddev.auc_roc);
  return out;
}

}  // namespace moldsynth
