#pragma once

// Many-to-one stacked LSTM classifier: forward pass, backpropagation through
// time, and Adam. Dense types are templated on the scalar so the same code
// path is used for 64-bit gradient checks and for training.

#include "moldsynth/core_types.hpp"
#include "moldsynth/random.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace moldsynth {

struct ModelConfig {
  double learning_rate = 0.0001175;
  int input_dim = kNumFeatures;
  int output_size = 1;
  std::vector<int> units{100, 100, 100};
  double dropout_inner = 0.1598;  // after every layer but the last
  double dropout_final = 0.279;   // after the last layer
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  int batch_size = 64;
  int epochs = 50;
  std::uint64_t seed = 0;
  bool standardize = true;

  /// Throws ConfigError.
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

/// Drop probabilities for inverted dropout after each layer's output.
struct DropoutRates {
  double inner = 0.0;
  double final = 0.0;

  static DropoutRates from(const ModelConfig& c) { return {c.dropout_inner, c.dropout_final}; }
};

/// Offsets of every tensor inside the flat parameter vector.
///
/// Layer l stores W = [W_x | W_h] as one column-major 4H x (F+H) block
/// followed by the bias b (4H). Gate row order is (i, f, g, o). The output
/// head w_out (1 x H_last) and b_out follow the last layer.
struct ParamLayout {
  struct Layer {
    int input = 0;
    int hidden = 0;
    Eigen::Index w_offset = 0;
    Eigen::Index b_offset = 0;
  };
  std::vector<Layer> layers;
  Eigen::Index w_out_offset = 0;
  Eigen::Index b_out_offset = 0;
  Eigen::Index size = 0;

  ParamLayout() = default;
  ParamLayout(int input_dim, std::span<const int> units);
  bool operator==(const ParamLayout& o) const;
};

template <typename Scalar>
class LstmParams {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

  LstmParams() = default;
  LstmParams(int input_dim, std::span<const int> units)
      : layout_(input_dim, units), flat_(Vector::Zero(layout_.size)) {}
  explicit LstmParams(ParamLayout layout) : layout_(std::move(layout)), flat_(Vector::Zero(layout_.size)) {}

  const ParamLayout& layout() const { return layout_; }
  int num_layers() const { return static_cast<int>(layout_.layers.size()); }
  int input_dim(int l) const { return layout_.layers[static_cast<size_t>(l)].input; }
  int hidden(int l) const { return layout_.layers[static_cast<size_t>(l)].hidden; }

  Eigen::Map<Matrix> w(int l) {
    const auto& L = layout_.layers[static_cast<size_t>(l)];
    return {flat_.data() + L.w_offset, 4 * L.hidden, L.input + L.hidden};
  }
  Eigen::Map<const Matrix> w(int l) const {
    const auto& L = layout_.layers[static_cast<size_t>(l)];
    return {flat_.data() + L.w_offset, 4 * L.hidden, L.input + L.hidden};
  }
  auto wx(int l) { return w(l).leftCols(input_dim(l)); }
  auto wx(int l) const { return w(l).leftCols(input_dim(l)); }
  auto wh(int l) { return w(l).rightCols(hidden(l)); }
  auto wh(int l) const { return w(l).rightCols(hidden(l)); }

  Eigen::Map<Vector> b(int l) {
    const auto& L = layout_.layers[static_cast<size_t>(l)];
    return {flat_.data() + L.b_offset, 4 * L.hidden};
  }
  Eigen::Map<const Vector> b(int l) const {
    const auto& L = layout_.layers[static_cast<size_t>(l)];
    return {flat_.data() + L.b_offset, 4 * L.hidden};
  }

  Eigen::Map<RowVector> w_out() { return {flat_.data() + layout_.w_out_offset, layout_.layers.back().hidden}; }
  Eigen::Map<const RowVector> w_out() const {
    return {flat_.data() + layout_.w_out_offset, layout_.layers.back().hidden};
  }
  Scalar& b_out() { return flat_[layout_.b_out_offset]; }
  Scalar b_out() const { return flat_[layout_.b_out_offset]; }

  Vector& flat() { return flat_; }
  const Vector& flat() const { return flat_; }

  template <typename Other>
  LstmParams<Other> cast() const {
    LstmParams<Other> out(layout_);
    out.flat() = flat_.template cast<Other>();
    return out;
  }

  bool all_finite() const { return flat_.allFinite(); }

 private:
  ParamLayout layout_;
  Vector flat_;
};

/// Left-padded batch. Column t*B + k of `inputs` is sample k at step t.
/// Sample k occupies the last lengths[k] steps; mask(k, t) is 1 there.
template <typename Scalar>
struct PaddedBatch {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Matrix inputs;  // F x (T*B)
  Matrix mask;    // B x T
  std::vector<Eigen::Index> lengths;
  Vector targets;  // B

  Eigen::Index batch() const { return mask.rows(); }
  Eigen::Index steps() const { return mask.cols(); }
  Eigen::Index features() const { return inputs.rows(); }

  /// Build from per-sample T_k x F sequences (rows are time steps).
  static PaddedBatch from_sequences(std::span<const Mat* const> seqs, std::span<const double> targets_in) {
    PaddedBatch out;
    const auto B = static_cast<Eigen::Index>(seqs.size());
    if (B == 0) throw DataError("empty batch");
    if (targets_in.size() != seqs.size()) throw DataError("batch targets/sequences size mismatch");
    Eigen::Index T = 0;
    const Eigen::Index F = seqs[0]->cols();
    for (const auto* s : seqs) {
      if (s->cols() != F) throw DataError("batch: inconsistent feature count");
      T = std::max<Eigen::Index>(T, s->rows());
    }
    out.inputs = Matrix::Zero(F, T * B);
    out.mask = Matrix::Zero(B, T);
    out.lengths.resize(static_cast<size_t>(B));
    out.targets.resize(B);
    for (Eigen::Index k = 0; k < B; ++k) {
      const auto& s = *seqs[static_cast<size_t>(k)];
      const Eigen::Index len = s.rows();
      const Eigen::Index pad = T - len;
      out.lengths[static_cast<size_t>(k)] = len;
      out.targets[k] = static_cast<Scalar>(targets_in[static_cast<size_t>(k)]);
      for (Eigen::Index t = 0; t < len; ++t) {
        out.inputs.col((pad + t) * B + k) = s.row(t).transpose().template cast<Scalar>();
        out.mask(k, pad + t) = Scalar(1);
      }
    }
    return out;
  }
};

template <typename Scalar>
struct ForwardCache {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  struct Layer {
    Matrix xh;      // (F+H) x TB, [x_t; h_{t-1}]
    Matrix gates;   // 4H x TB, activated (i, f, g, o)
    Matrix tanh_c;  // H x TB, tanh of the unmasked cell update
    Matrix c;       // H x TB, masked cell state
    Matrix h;       // H x TB, masked hidden state
    Matrix drop;    // H x TB scaled keep mask (empty when no dropout)
    Matrix y;       // H x TB, h after dropout (empty when no dropout)
  };
  std::vector<Layer> layers;
  Matrix head_drop;  // H x B (empty when no dropout)
  Matrix head_in;    // H x B
  Eigen::Matrix<Scalar, 1, Eigen::Dynamic> scores;
};

namespace detail {

template <typename Derived>
auto sigmoid(const Eigen::ArrayBase<Derived>& x) {
  using S = typename Derived::Scalar;
  return (S(1) + (-x).exp()).inverse();
}

/// Inverted-dropout keep mask scaled by 1/(1-rate), drawn from the Philox
/// counter space of (seed, tensor_id, element index).
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> dropout_mask(Eigen::Index rows, Eigen::Index cols,
                                                                   double rate, std::uint64_t seed,
                                                                   std::uint32_t tensor_id) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> m(rows, cols);
  const Scalar keep_scale = static_cast<Scalar>(1.0 / (1.0 - rate));
  const Philox4x32::Key key{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  Scalar* p = m.data();
  const Eigen::Index n = m.size();
  for (Eigen::Index block = 0; block * 4 < n; ++block) {
    const auto bits = Philox4x32::apply(
        {static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(static_cast<std::uint64_t>(block) >> 32),
         tensor_id, 0x64726f70u},
        key);
    for (int j = 0; j < 4 && block * 4 + j < n; ++j) {
      const double u = (static_cast<double>(bits[static_cast<size_t>(j)]) + 0.5) * 0x1.0p-32;
      p[block * 4 + j] = u >= rate ? keep_scale : Scalar(0);
    }
  }
  return m;
}

}  // namespace detail

/// Scores in (0, 1), one per sample. When `cache` is non-null it is filled
/// with everything `backward` needs.
template <typename Scalar>
Eigen::Matrix<Scalar, 1, Eigen::Dynamic> forward(const LstmParams<Scalar>& params, const PaddedBatch<Scalar>& batch,
                                                 bool train_mode, std::uint64_t dropout_seed,
                                                 const DropoutRates& rates, ForwardCache<Scalar>* cache = nullptr) {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const Eigen::Index B = batch.batch();
  const Eigen::Index T = batch.steps();
  const int L = params.num_layers();
  if (batch.features() != params.input_dim(0)) {
    throw DataError("forward: batch has " + std::to_string(batch.features()) + " features, model expects " +
                    std::to_string(params.input_dim(0)));
  }
  if (batch.inputs.cols() != T * B) throw DataError("forward: inputs/mask shape mismatch");

  ForwardCache<Scalar> local;
  ForwardCache<Scalar>& fc = cache ? *cache : local;
  fc.layers.resize(static_cast<size_t>(L));

  const Matrix* input = &batch.inputs;
  for (int l = 0; l < L; ++l) {
    auto& lc = fc.layers[static_cast<size_t>(l)];
    const int F = params.input_dim(l);
    const int H = params.hidden(l);
    const auto W = params.w(l);
    const auto bias = params.b(l);

    lc.xh.resize(F + H, T * B);
    lc.gates.resize(4 * H, T * B);
    lc.tanh_c.resize(H, T * B);
    lc.c.resize(H, T * B);
    lc.h.resize(H, T * B);

    const Matrix zero_state = Matrix::Zero(H, B);
    for (Eigen::Index t = 0; t < T; ++t) {
      auto xh = lc.xh.middleCols(t * B, B);
      xh.topRows(F) = input->middleCols(t * B, B);
      const Matrix& h_src = t == 0 ? zero_state : lc.h;
      const Matrix& c_src = t == 0 ? zero_state : lc.c;
      const Eigen::Index prev = t == 0 ? 0 : (t - 1) * B;
      const auto h_prev = h_src.middleCols(prev, B);
      const auto c_prev = c_src.middleCols(prev, B);
      xh.bottomRows(H) = h_prev;

      auto z = lc.gates.middleCols(t * B, B);
      z.noalias() = W * xh;
      z.colwise() += bias;
      z.topRows(2 * H) = detail::sigmoid(z.topRows(2 * H).array()).matrix();
      z.middleRows(2 * H, H) = z.middleRows(2 * H, H).array().tanh().matrix();
      z.bottomRows(H) = detail::sigmoid(z.bottomRows(H).array()).matrix();

      auto c = lc.c.middleCols(t * B, B);
      auto tc = lc.tanh_c.middleCols(t * B, B);
      auto h = lc.h.middleCols(t * B, B);
      c = (z.middleRows(H, H).array() * c_prev.array() + z.topRows(H).array() * z.middleRows(2 * H, H).array())
              .matrix();
      tc = c.array().tanh().matrix();
      h = (z.bottomRows(H).array() * tc.array()).matrix();
      // Padded steps carry the previous state through unchanged.
      for (Eigen::Index k = 0; k < B; ++k) {
        if (batch.mask(k, t) == Scalar(0)) {
          c.col(k) = c_prev.col(k);
          h.col(k) = h_prev.col(k);
        }
      }
    }

    const bool last = l == L - 1;
    if (!last) {
      if (train_mode && rates.inner > 0.0) {
        lc.drop = detail::dropout_mask<Scalar>(H, T * B, rates.inner, dropout_seed, static_cast<std::uint32_t>(l));
        lc.y = (lc.h.array() * lc.drop.array()).matrix();
        input = &lc.y;
      } else {
        lc.drop.resize(0, 0);
        lc.y.resize(0, 0);
        input = &lc.h;
      }
    } else {
      lc.drop.resize(0, 0);
      lc.y.resize(0, 0);
    }
  }

  const auto& top = fc.layers.back();
  const Eigen::Index H = params.hidden(L - 1);
  if (train_mode && rates.final > 0.0) {
    fc.head_drop = detail::dropout_mask<Scalar>(H, B, rates.final, dropout_seed, static_cast<std::uint32_t>(L));
    fc.head_in = (top.h.middleCols((T - 1) * B, B).array() * fc.head_drop.array()).matrix();
  } else {
    fc.head_drop.resize(0, 0);
    fc.head_in = top.h.middleCols((T - 1) * B, B);
  }
  Eigen::Matrix<Scalar, 1, Eigen::Dynamic> pre = params.w_out() * fc.head_in;
  pre.array() += params.b_out();
  fc.scores = detail::sigmoid(pre.array()).matrix();
  return fc.scores;
}

template <typename Scalar, typename DS, typename DT>
Scalar loss_mse(const Eigen::MatrixBase<DS>& scores, const Eigen::MatrixBase<DT>& targets) {
  if (scores.size() == 0) throw DataError("loss_mse: empty batch");
  if (scores.size() != targets.size()) throw DataError("loss_mse: size mismatch");
  Scalar sum = 0;
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    const Scalar d = static_cast<Scalar>(scores(i)) - static_cast<Scalar>(targets(i));
    sum += d * d;
  }
  return sum / static_cast<Scalar>(scores.size());
}

template <typename Scalar>
struct Gradients {
  Scalar loss = 0;
  Eigen::Matrix<Scalar, 1, Eigen::Dynamic> scores;
  LstmParams<Scalar> grads;
};

/// Exact gradient of the batch-mean squared error with respect to every
/// parameter, using the same dropout masks as a train-mode forward with
/// `dropout_seed` (or none when train_mode is false).
template <typename Scalar>
Gradients<Scalar> backward(const LstmParams<Scalar>& params, const PaddedBatch<Scalar>& batch,
                           std::uint64_t dropout_seed, const DropoutRates& rates, bool train_mode = true) {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  ForwardCache<Scalar> fc;
  forward(params, batch, train_mode, dropout_seed, rates, &fc);

  const Eigen::Index B = batch.batch();
  const Eigen::Index T = batch.steps();
  const int L = params.num_layers();

  Gradients<Scalar> out;
  out.scores = fc.scores;
  out.loss = loss_mse<Scalar>(fc.scores, batch.targets.transpose());
  out.grads = LstmParams<Scalar>(params.layout());
  auto& g = out.grads;

  // Head: s = sigmoid(w_out . d + b_out).
  const auto s = fc.scores.array();
  const Eigen::Array<Scalar, 1, Eigen::Dynamic> dpre =
      (Scalar(2) / static_cast<Scalar>(B)) * (s - batch.targets.transpose().array()) * s * (Scalar(1) - s);
  g.w_out().noalias() = dpre.matrix() * fc.head_in.transpose();
  g.b_out() = dpre.sum();
  Matrix d_head = params.w_out().transpose() * dpre.matrix();  // H x B
  if (fc.head_drop.size() > 0) d_head.array() *= fc.head_drop.array();

  // dY holds the gradient w.r.t. the current layer's masked hidden sequence.
  Matrix dY;
  for (int l = L - 1; l >= 0; --l) {
    const auto& lc = fc.layers[static_cast<size_t>(l)];
    const int F = params.input_dim(l);
    const int H = params.hidden(l);
    const auto W = params.w(l);

    Matrix dZ(4 * H, T * B);
    Matrix dh_next = Matrix::Zero(H, B);
    Matrix dc_next = Matrix::Zero(H, B);
    Matrix dh(H, B), dc(H, B), dxh(F + H, B);
    Matrix dX;
    if (l > 0) dX.resize(F, T * B);

    for (Eigen::Index t = T - 1; t >= 0; --t) {
      dh = dh_next;
      if (l == L - 1) {
        if (t == T - 1) dh += d_head;
      } else {
        dh += dY.middleCols(t * B, B);
      }
      dc = dc_next;

      const auto gates = lc.gates.middleCols(t * B, B);
      const auto ig = gates.topRows(H).array();
      const auto fg = gates.middleRows(H, H).array();
      const auto gg = gates.middleRows(2 * H, H).array();
      const auto og = gates.bottomRows(H).array();
      const auto tc = lc.tanh_c.middleCols(t * B, B).array();

      // Masked columns: the step is the identity on (h, c).
      Matrix dh_t = dh;
      Matrix dc_t = dc;
      for (Eigen::Index k = 0; k < B; ++k) {
        if (batch.mask(k, t) == Scalar(0)) {
          dh_t.col(k).setZero();
          dc_t.col(k).setZero();
        }
      }

      const Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic> dct =
          dc_t.array() + dh_t.array() * og * (Scalar(1) - tc * tc);
      auto dz = dZ.middleCols(t * B, B);
      if (t > 0) {
        const auto cp = lc.c.middleCols((t - 1) * B, B).array();
        dz.middleRows(H, H) = (dct * cp * fg * (Scalar(1) - fg)).matrix();
      } else {
        dz.middleRows(H, H).setZero();
      }
      dz.topRows(H) = (dct * gg * ig * (Scalar(1) - ig)).matrix();
      dz.middleRows(2 * H, H) = (dct * ig * (Scalar(1) - gg * gg)).matrix();
      dz.bottomRows(H) = (dh_t.array() * tc * og * (Scalar(1) - og)).matrix();

      if (l > 0) {
        dxh.noalias() = W.transpose() * dz;
        dX.middleCols(t * B, B) = dxh.topRows(F);
        dh_next = dxh.bottomRows(H);
      } else {
        dh_next.noalias() = W.rightCols(H).transpose() * dz;
      }
      dc_next = (dct * fg).matrix();
      for (Eigen::Index k = 0; k < B; ++k) {
        if (batch.mask(k, t) == Scalar(0)) {
          dh_next.col(k) = dh.col(k);
          dc_next.col(k) = dc.col(k);
        }
      }
    }

    g.w(l).noalias() = dZ * lc.xh.transpose();
    g.b(l) = dZ.rowwise().sum();

    if (l > 0) {
      const auto& below = fc.layers[static_cast<size_t>(l - 1)];
      if (below.drop.size() > 0) dX.array() *= below.drop.array();
      dY = std::move(dX);
    }
  }
  return out;
}

template <typename Scalar>
struct AdamState {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> m;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> v;
  long long step = 0;

  explicit AdamState(Eigen::Index n = 0)
      : m(Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(n)), v(Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(n)) {}
};

struct AdamHyper {
  double learning_rate = 0.0001175;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamHyper from(const ModelConfig& c) {
    return {c.learning_rate, c.adam_beta1, c.adam_beta2, c.adam_epsilon};
  }
};

/// One bias-corrected Adam update at step index t >= 1.
template <typename Scalar, typename DP, typename DG>
void adam_update(Eigen::MatrixBase<DP>& theta, const Eigen::MatrixBase<DG>& grad, AdamState<Scalar>& state,
                 const AdamHyper& hp, long long t) {
  if (t < 1) throw ConfigError("adam step index must be >= 1");
  const Scalar b1 = static_cast<Scalar>(hp.beta1);
  const Scalar b2 = static_cast<Scalar>(hp.beta2);
  state.m = b1 * state.m + (Scalar(1) - b1) * grad;
  state.v = b2 * state.v + (Scalar(1) - b2) * grad.cwiseProduct(grad);
  const Scalar c1 = static_cast<Scalar>(1.0 - std::pow(hp.beta1, static_cast<double>(t)));
  const Scalar c2 = static_cast<Scalar>(1.0 - std::pow(hp.beta2, static_cast<double>(t)));
  const Scalar lr = static_cast<Scalar>(hp.learning_rate);
  const Scalar eps = static_cast<Scalar>(hp.epsilon);
  theta.derived().array() -= lr * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + eps);
  state.step = t;
}

template <typename Scalar>
void adam_step(LstmParams<Scalar>& params, const LstmParams<Scalar>& grads, AdamState<Scalar>& state,
               const AdamHyper& hp, long long t) {
  if (state.m.size() != params.flat().size()) state = AdamState<Scalar>(params.flat().size());
  adam_update(params.flat(), grads.flat(), state, hp, t);
}

/// Glorot-uniform weights on the open interval (-a, a) with
/// a = sqrt(6 / (fan_in + fan_out)); zero biases except the forget gate (1).
template <typename Scalar>
LstmParams<Scalar> init_params(const ModelConfig& config, std::uint64_t seed) {
  LstmParams<Scalar> p(config.input_dim, config.units);
  RandomStream rng(seed, 0x696e6974ULL);
  auto fill = [&rng](auto&& block, double fan_in, double fan_out) {
    const double a = std::sqrt(6.0 / (fan_in + fan_out));
    for (Eigen::Index j = 0; j < block.cols(); ++j) {
      for (Eigen::Index i = 0; i < block.rows(); ++i) {
        block(i, j) = static_cast<Scalar>((2.0 * rng.uniform() - 1.0) * a);
      }
    }
  };
  for (int l = 0; l < p.num_layers(); ++l) {
    const int F = p.input_dim(l);
    const int H = p.hidden(l);
    fill(p.wx(l), F, 4.0 * H);
    fill(p.wh(l), H, 4.0 * H);
    p.b(l).setZero();
    p.b(l).segment(H, H).setOnes();
  }
  fill(p.w_out(), p.hidden(p.num_layers() - 1), config.output_size);
  p.b_out() = Scalar(0);
  return p;
}

}  // namespace moldsynth
