#include "moldsynth/pipeline.hpp"

#include "moldsynth/random.hpp"

#include <algorithm>
#include <cmath>

namespace moldsynth {

std::vector<CycleRecord> decimate_augment(const CycleRecord& record, int factor) {
  if (factor < 1) throw ConfigError("decimate_augment: factor must be >= 1");
  const Eigen::Index T = record.samples.rows();
  if (T < factor) {
    throw DataError("decimate_augment: record " + record.cycle_id + " has T=" + std::to_string(T) +
                    " < factor " + std::to_string(factor));
  }
  std::vector<CycleRecord> out;
  out.reserve(static_cast<size_t>(factor));
  for (int k = 0; k < factor; ++k) {
    const Eigen::Index rows = (T - k + factor - 1) / factor;
    CycleRecord r;
    r.cycle_id = record.cycle_id + "-p" + std::to_string(k);
    r.source = record.source;
    r.label = record.label;
    r.sample_period_ms = record.sample_period_ms * factor;
    r.setpoints = record.setpoints;
    r.quality = record.quality;
    r.samples.resize(rows, record.samples.cols());
    for (Eigen::Index i = 0; i < rows; ++i) r.samples.row(i) = record.samples.row(k + i * factor);
    out.push_back(std::move(r));
  }
  return out;
}

Dataset augment_dataset(const Dataset& dataset, int factor) {
  Dataset out;
  out.name = dataset.name;
  out.records.reserve(dataset.size() * static_cast<size_t>(std::max(factor, 1)));
  for (const auto& r : dataset.records) {
    for (auto& d : decimate_augment(r, factor)) out.records.push_back(std::move(d));
  }
  return out;
}

Mat interleave_phases(const std::vector<CycleRecord>& phases) {
  if (phases.empty()) throw DataError("interleave_phases: no phases");
  const auto factor = static_cast<Eigen::Index>(phases.size());
  Eigen::Index T = 0;
  for (const auto& p : phases) T += p.samples.rows();
  Mat out(T, phases.front().samples.cols());
  for (Eigen::Index k = 0; k < factor; ++k) {
    const Mat& s = phases[static_cast<size_t>(k)].samples;
    for (Eigen::Index i = 0; i < s.rows(); ++i) out.row(k + i * factor) = s.row(i);
  }
  return out;
}

Split split_real(const Dataset& dataset, const SplitSpec& spec) {
  if (!(spec.val_fraction > 0.0 && spec.val_fraction < 1.0)) throw ConfigError("val_fraction must lie in (0, 1)");
  for (const auto& r : dataset.records) {
    if (r.source != Source::Real) {
      throw DataError("split_real: record " + r.cycle_id + " is synthetic; validation data must be real-only");
    }
  }
  const size_t n = dataset.size();
  const auto n_val = static_cast<size_t>(round_half_away(spec.val_fraction * static_cast<double>(n)));
  RandomStream rng(spec.seed, 0x73706c74ULL);
  const auto perm = rng.permutation(n);
  Split s;
  s.train.name = dataset.name + "/train";
  s.val.name = dataset.name + "/val";
  s.val.records.reserve(n_val);
  s.train.records.reserve(n - n_val);
  for (size_t i = 0; i < n; ++i) {
    (i < n_val ? s.val : s.train).records.push_back(dataset.records[perm[i]]);
  }
  return s;
}

std::string_view to_string(MixMode m) { return m == MixMode::Additive ? "additive" : "substitutive"; }

MixMode parse_mix_mode(std::string_view s) {
  if (s == "additive") return MixMode::Additive;
  if (s == "substitutive") return MixMode::Substitutive;
  throw ConfigError("unknown mix mode '" + std::string(s) + "'");
}

std::vector<CycleRecord> sample_stratified(const Dataset& pool, size_t count, std::uint64_t seed) {
  if (count > pool.size()) {
    throw DataError("synthetic pool too small: need " + std::to_string(count) + ", have " +
                    std::to_string(pool.size()));
  }
  std::vector<size_t> good, bad;
  for (size_t i = 0; i < pool.size(); ++i) (pool.records[i].label.is_good() ? good : bad).push_back(i);
  auto n_good = static_cast<size_t>(round_half_away(static_cast<double>(count) * static_cast<double>(good.size()) /
                                                    static_cast<double>(std::max<size_t>(pool.size(), 1))));
  n_good = std::min(n_good, good.size());
  if (count - n_good > bad.size()) n_good = count - bad.size();
  const size_t n_bad = count - n_good;

  RandomStream rng(seed, 0x73747261ULL);
  rng.shuffle(std::span<size_t>(good));
  rng.shuffle(std::span<size_t>(bad));
  std::vector<size_t> chosen(good.begin(), good.begin() + static_cast<std::ptrdiff_t>(n_good));
  chosen.insert(chosen.end(), bad.begin(), bad.begin() + static_cast<std::ptrdiff_t>(n_bad));
  std::sort(chosen.begin(), chosen.end());
  std::vector<CycleRecord> out;
  out.reserve(count);
  for (size_t i : chosen) out.push_back(pool.records[i]);
  return out;
}

MixAccounting additive_accounting(long long real_train, long long real_total, double percent) {
  if (!(percent >= 0.0 && percent <= 100.0)) throw ConfigError("mix percent must lie in [0, 100]");
  MixAccounting a;
  a.mode = MixMode::Additive;
  a.percent = percent;
  a.real_total = real_total;
  a.real_count = real_train;
  a.synthetic_count = round_half_away(percent / 100.0 * static_cast<double>(real_total));
  a.training_count = a.real_count + a.synthetic_count;
  a.validation_count = real_total - real_train;
  a.total_count = a.training_count + a.validation_count;
  a.synthetic_fraction_training = static_cast<double>(a.synthetic_count) / static_cast<double>(real_train);
  a.real_fraction_training = 1.0;
  return a;
}

MixAccounting substitutive_accounting(long long real_train, long long real_total, long long synthetic_count,
                                      long long fixed_size) {
  if (synthetic_count < 0 || synthetic_count > fixed_size) {
    throw ConfigError("substitutive mix: synthetic_count must lie in [0, fixed_size]");
  }
  if (real_train < fixed_size - synthetic_count) {
    throw DataError("substitutive mix: need " + std::to_string(fixed_size - synthetic_count) +
                    " real training records, have " + std::to_string(real_train));
  }
  MixAccounting a;
  a.mode = MixMode::Substitutive;
  a.real_total = real_total;
  a.synthetic_count = synthetic_count;
  a.real_count = fixed_size - synthetic_count;
  a.training_count = fixed_size;
  a.validation_count = real_total - real_train;
  a.total_count = a.training_count + a.validation_count;
  a.percent = 100.0 * static_cast<double>(synthetic_count) / static_cast<double>(real_total);
  a.synthetic_fraction_training = static_cast<double>(synthetic_count) / static_cast<double>(real_train);
  a.real_fraction_training = static_cast<double>(a.real_count) / static_cast<double>(real_train);
  return a;
}

MixResult mix_additive(const Dataset& real_train, const Dataset& synthetic_pool, double percent,
                       long long real_total, std::uint64_t seed) {
  MixResult m;
  m.accounting = additive_accounting(static_cast<long long>(real_train.size()), real_total, percent);
  m.train.name = real_train.name + "+additive";
  m.train.records = real_train.records;
  for (auto& r : sample_stratified(synthetic_pool, static_cast<size_t>(m.accounting.synthetic_count), seed)) {
    m.train.records.push_back(std::move(r));
  }
  return m;
}

MixResult mix_substitutive(const Dataset& real_train, const Dataset& synthetic_pool, long long synthetic_count,
                           long long fixed_size, std::uint64_t seed, long long real_total) {
  const auto n_real_train = static_cast<long long>(real_train.size());
  MixResult m;
  m.accounting = substitutive_accounting(n_real_train, real_total < 0 ? n_real_train : real_total, synthetic_count,
                                         fixed_size);
  m.train.name = real_train.name + "+substitutive";
  RandomStream rng(seed, 0x7265616cULL);
  auto perm = rng.permutation(real_train.size());
  perm.resize(static_cast<size_t>(m.accounting.real_count));
  std::sort(perm.begin(), perm.end());
  for (size_t i : perm) m.train.records.push_back(real_train.records[i]);
  for (auto& r : sample_stratified(synthetic_pool, static_cast<size_t>(synthetic_count), mix64(seed, 1))) {
    m.train.records.push_back(std::move(r));
  }
  return m;
}

}  // namespace moldsynth
