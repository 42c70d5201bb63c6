#include "moldsynth/lstm.hpp"

namespace moldsynth {

void ModelConfig::validate() const {
  auto rate_ok = [](double r) { return r >= 0.0 && r < 1.0; };
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (input_dim <= 0) throw ConfigError("input_dim must be positive");
  if (output_size != 1) throw ConfigError("output_size must be 1 (binary classifier)");
  if (units.empty()) throw ConfigError("at least one LSTM layer is required");
  for (int u : units) {
    if (u <= 0) throw ConfigError("LSTM units must be positive");
  }
  if (!rate_ok(dropout_inner) || !rate_ok(dropout_final)) throw ConfigError("dropout rates must lie in [0, 1)");
  if (!rate_ok(adam_beta1) || !rate_ok(adam_beta2)) throw ConfigError("Adam betas must lie in [0, 1)");
  if (!(adam_epsilon > 0.0)) throw ConfigError("Adam epsilon must be positive");
  if (batch_size <= 0) throw ConfigError("batch_size must be positive");
  if (epochs <= 0) throw ConfigError("epochs must be positive");
}

ParamLayout::ParamLayout(int input_dim, std::span<const int> units) {
  Eigen::Index off = 0;
  int in = input_dim;
  for (int h : units) {
    Layer L;
    L.input = in;
    L.hidden = h;
    L.w_offset = off;
    off += static_cast<Eigen::Index>(4 * h) * (in + h);
    L.b_offset = off;
    off += 4 * h;
    layers.push_back(L);
    in = h;
  }
  w_out_offset = off;
  off += in;
  b_out_offset = off;
  size = off + 1;
}

bool ParamLayout::operator==(const ParamLayout& o) const {
  if (layers.size() != o.layers.size() || size != o.size) return false;
  for (size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].input != o.layers[i].input || layers[i].hidden != o.layers[i].hidden) return false;
  }
  return true;
}

}  // namespace moldsynth
