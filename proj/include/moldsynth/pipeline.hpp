#pragma once

#include "moldsynth/core_types.hpp"

#include <cstdint>
#include <string_view>
#include <vector>

namespace moldsynth {

/// Stride-`factor` phase decimation: output k holds rows k, k+factor, ...
/// of the input at factor times the sample period. Ids get a "-p<k>" suffix.
std::vector<CycleRecord> decimate_augment(const CycleRecord& record, int factor = 4);

/// Every record of `dataset` decimated, outputs kept together per source
/// record in phase order.
Dataset augment_dataset(const Dataset& dataset, int factor = 4);

/// Inverse of decimate_augment for a complete set of phase outputs.
Mat interleave_phases(const std::vector<CycleRecord>& phases);

struct SplitSpec {
  double val_fraction = 0.33;
  std::uint64_t seed = 0;
};

struct Split {
  Dataset train;
  Dataset val;
};

/// Seeded uniform shuffle; |val| = round(val_fraction * |dataset|).
/// Only real records are accepted.
Split split_real(const Dataset& dataset, const SplitSpec& spec);

enum class MixMode { Additive, Substitutive };
std::string_view to_string(MixMode m);
MixMode parse_mix_mode(std::string_view s);

struct MixAccounting {
  MixMode mode = MixMode::Additive;
  long long real_total = 0;        // size of the full real dataset (train + val)
  long long real_count = 0;        // real records in the training set
  long long synthetic_count = 0;   // synthetic records in the training set
  long long training_count = 0;    // real_count + synthetic_count
  long long validation_count = 0;  // real_total - |real_train|
  long long total_count = 0;       // training_count + validation_count
  double percent = 0.0;            // additive: requested percent of real_total
  /// synthetic_count / |real_train| (the real training size before mixing).
  double synthetic_fraction_training = 0.0;
  /// real_count / |real_train|.
  double real_fraction_training = 0.0;
};

struct MixResult {
  Dataset train;
  MixAccounting accounting;
};

/// Draw `count` records from `pool`, stratified to the pool's class mix,
/// order-stable in the seed.
std::vector<CycleRecord> sample_stratified(const Dataset& pool, size_t count, std::uint64_t seed);

/// All of real_train plus round(percent/100 * real_total) synthetic records.
MixResult mix_additive(const Dataset& real_train, const Dataset& synthetic_pool, double percent,
                       long long real_total, std::uint64_t seed);

/// (fixed_size - synthetic_count) sampled real records plus synthetic_count
/// synthetic ones; |train| == fixed_size.
MixResult mix_substitutive(const Dataset& real_train, const Dataset& synthetic_pool, long long synthetic_count,
                           long long fixed_size, std::uint64_t seed, long long real_total = -1);

/// Arithmetic-only accounting, identical to what the mix functions report.
MixAccounting additive_accounting(long long real_train, long long real_total, double percent);
MixAccounting substitutive_accounting(long long real_train, long long real_total, long long synthetic_count,
                                      long long fixed_size);

}  // namespace moldsynth
