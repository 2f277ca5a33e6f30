#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "uavsearch/rng.hpp"

namespace uavsearch::nn {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// One convolution layer: square kernel, stride 1, no padding, ReLU.
struct ConvSpec {
  int kernel = 3;
  int channels = 8;
  friend bool operator==(const ConvSpec&, const ConvSpec&) = default;
};

/// Two parallel convolution branches (local and global map), flattened and
/// concatenated with the budget scalar, followed by dense layers. Hidden
/// dense layers use ReLU; the last one is linear and has one unit per action.
struct QNetworkSpec {
  int in_channels = 3;
  int local_size = 11;
  int global_size = 32;
  std::vector<ConvSpec> local_branch;
  std::vector<ConvSpec> global_branch;
  std::vector<int> head;

  int action_count() const { return head.empty() ? 0 : head.back(); }
  void validate() const;
  /// Canonical text form; the checkpoint spec hash is taken over it.
  std::string describe() const;
  std::uint64_t hash() const;
  std::size_t parameter_count() const;

  /// Full-scale network: kernels 5 then 3 in both branches, dense 256-256-256.
  static QNetworkSpec full_scale(int F, int G, int actions);

  friend bool operator==(const QNetworkSpec&, const QNetworkSpec&) = default;
};

/// Parses "5x16,3x32" into conv specs and "256,256,256" into widths.
std::vector<ConvSpec> parse_conv_list(const std::string& text);
std::string format_conv_list(const std::vector<ConvSpec>& convs);
std::vector<int> parse_width_list(const std::string& text);
std::string format_width_list(const std::vector<int>& widths);

struct ConvLayout {
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 0;
  int in_size = 0;
  int out_size = 0;
  std::size_t weight_offset = 0;  ///< out_channels x (in_channels * kernel^2), column-major
  std::size_t bias_offset = 0;
};

struct DenseLayout {
  int in = 0;
  int out = 0;
  std::size_t weight_offset = 0;  ///< out x in, column-major
  std::size_t bias_offset = 0;
};

/// Where every layer's parameters live inside the flat parameter vector.
struct NetworkLayout {
  std::vector<ConvLayout> local;
  std::vector<ConvLayout> global;
  std::vector<DenseLayout> dense;
  int local_features = 0;
  int global_features = 0;
  std::size_t parameter_count = 0;

  explicit NetworkLayout(const QNetworkSpec& spec);
  int feature_count() const { return local_features + global_features + 1; }
};

/// Flat trainable parameters plus the start offset of each layer.
template <typename Scalar>
struct NetworkParams {
  Vector<Scalar> values;
  std::vector<std::size_t> layer_offsets;

  std::size_t size() const { return static_cast<std::size_t>(values.size()); }
};

/// Network input for a batch: one column per sample.
template <typename Scalar>
struct Batch {
  Matrix<Scalar> local;   ///< (in_channels * F * F) x B
  Matrix<Scalar> global;  ///< (in_channels * G * G) x B
  Matrix<Scalar> budget;  ///< 1 x B

  Eigen::Index size() const { return local.cols(); }
};

/// Activations kept by forward() for backward().
template <typename Scalar>
struct ForwardCache {
  bool valid = false;
  Eigen::Index batch = 0;
  std::vector<Matrix<Scalar>> local_cols, local_act;
  std::vector<Matrix<Scalar>> global_cols, global_act;
  Matrix<Scalar> features;
  std::vector<Matrix<Scalar>> dense_act;
};

namespace detail {

/// Unfolds `act` (channels x B*size*size) into (channels*k*k) x (B*out*out).
template <typename Scalar>
void im2col(const Matrix<Scalar>& act, const ConvLayout& l, Eigen::Index batch, Matrix<Scalar>& cols) {
  const int k = l.kernel;
  const int in = l.in_size;
  const int out = l.out_size;
  cols.resize(static_cast<Eigen::Index>(l.in_channels) * k * k, batch * out * out);
  for (Eigen::Index b = 0; b < batch; ++b) {
    for (int oy = 0; oy < out; ++oy) {
      for (int ox = 0; ox < out; ++ox) {
        const Eigen::Index col = b * out * out + oy * out + ox;
        Scalar* dst = cols.col(col).data();
        for (int c = 0; c < l.in_channels; ++c) {
          for (int dy = 0; dy < k; ++dy) {
            const Eigen::Index src_base = b * in * in + (oy + dy) * in + ox;
            for (int dx = 0; dx < k; ++dx) *dst++ = act(c, src_base + dx);
          }
        }
      }
    }
  }
}

/// Adjoint of im2col: scatters column gradients back onto the input layout.
template <typename Scalar>
void col2im(const Matrix<Scalar>& dcols, const ConvLayout& l, Eigen::Index batch, Matrix<Scalar>& dact) {
  const int k = l.kernel;
  const int in = l.in_size;
  const int out = l.out_size;
  dact.setZero(l.in_channels, batch * in * in);
  for (Eigen::Index b = 0; b < batch; ++b) {
    for (int oy = 0; oy < out; ++oy) {
      for (int ox = 0; ox < out; ++ox) {
        const Scalar* src = dcols.col(b * out * out + oy * out + ox).data();
        for (int c = 0; c < l.in_channels; ++c) {
          for (int dy = 0; dy < k; ++dy) {
            const Eigen::Index dst_base = b * in * in + (oy + dy) * in + ox;
            for (int dx = 0; dx < k; ++dx) dact(c, dst_base + dx) += *src++;
          }
        }
      }
    }
  }
}

/// (channels*size*size) x B sample columns -> channels x (B*size*size).
template <typename Scalar>
Matrix<Scalar> to_channel_rows(const Matrix<Scalar>& input, int channels) {
  const Eigen::Index batch = input.cols();
  const Eigen::Index area = input.rows() / channels;
  Matrix<Scalar> out(channels, batch * area);
  for (Eigen::Index b = 0; b < batch; ++b) {
    for (int c = 0; c < channels; ++c) {
      out.row(c).segment(b * area, area) = input.col(b).segment(c * area, area).transpose();
    }
  }
  return out;
}

template <typename Scalar>
Matrix<Scalar> run_branch(const std::vector<ConvLayout>& layers, const Vector<Scalar>& params,
                          const Matrix<Scalar>& input, int in_channels,
                          std::vector<Matrix<Scalar>>& cols, std::vector<Matrix<Scalar>>& acts) {
  const Eigen::Index batch = input.cols();
  cols.resize(layers.size());
  acts.resize(layers.size());
  if (layers.empty()) return input;
  const Matrix<Scalar> first = to_channel_rows(input, in_channels);
  const Matrix<Scalar>* current = &first;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const ConvLayout& l = layers[i];
    im2col(*current, l, batch, cols[i]);
    const Eigen::Map<const Matrix<Scalar>> w(params.data() + l.weight_offset, l.out_channels,
                                             static_cast<Eigen::Index>(l.in_channels) * l.kernel * l.kernel);
    const Eigen::Map<const Vector<Scalar>> bias(params.data() + l.bias_offset, l.out_channels);
    acts[i].noalias() = w * cols[i];
    acts[i].colwise() += bias;
    acts[i] = acts[i].cwiseMax(Scalar(0));
    current = &acts[i];
  }
  // channels x (B*area) -> (channels*area) x B
  const ConvLayout& last = layers.back();
  const Eigen::Index area = static_cast<Eigen::Index>(last.out_size) * last.out_size;
  Matrix<Scalar> flat(last.out_channels * area, batch);
  for (Eigen::Index b = 0; b < batch; ++b) {
    for (int c = 0; c < last.out_channels; ++c) {
      flat.col(b).segment(c * area, area) = acts.back().row(c).segment(b * area, area).transpose();
    }
  }
  return flat;
}

template <typename Scalar>
void backprop_branch(const std::vector<ConvLayout>& layers, const Vector<Scalar>& params,
                     const std::vector<Matrix<Scalar>>& cols, const std::vector<Matrix<Scalar>>& acts,
                     const Matrix<Scalar>& dflat, Eigen::Index batch, Vector<Scalar>& grad) {
  if (layers.empty()) return;
  const ConvLayout& last = layers.back();
  const Eigen::Index area = static_cast<Eigen::Index>(last.out_size) * last.out_size;
  Matrix<Scalar> dact(last.out_channels, batch * area);
  for (Eigen::Index b = 0; b < batch; ++b) {
    for (int c = 0; c < last.out_channels; ++c) {
      dact.row(c).segment(b * area, area) = dflat.col(b).segment(c * area, area).transpose();
    }
  }
  for (std::size_t i = layers.size(); i-- > 0;) {
    const ConvLayout& l = layers[i];
    const Eigen::Index fan_in = static_cast<Eigen::Index>(l.in_channels) * l.kernel * l.kernel;
    const Matrix<Scalar> dz = dact.cwiseProduct((acts[i].array() > Scalar(0)).matrix().template cast<Scalar>());
    Eigen::Map<Matrix<Scalar>> dw(grad.data() + l.weight_offset, l.out_channels, fan_in);
    Eigen::Map<Vector<Scalar>> db(grad.data() + l.bias_offset, l.out_channels);
    dw.noalias() += dz * cols[i].transpose();
    db += dz.rowwise().sum();
    if (i > 0) {
      const Eigen::Map<const Matrix<Scalar>> w(params.data() + l.weight_offset, l.out_channels, fan_in);
      const Matrix<Scalar> dcols = w.transpose() * dz;
      col2im(dcols, l, batch, dact);
    }
  }
}

}  // namespace detail

/// Q-network evaluator. Holds the architecture only; parameters are passed in
/// so policy and target networks share one instance.
template <typename Scalar>
class QNetwork {
 public:
  explicit QNetwork(QNetworkSpec spec) : spec_((spec.validate(), std::move(spec))), layout_(spec_) {}

  const QNetworkSpec& spec() const { return spec_; }
  const NetworkLayout& layout() const { return layout_; }
  std::size_t parameter_count() const { return layout_.parameter_count; }

  /// Returns Q-values, one column per sample (actions x B).
  Matrix<Scalar> forward(const Vector<Scalar>& params, const Batch<Scalar>& in,
                         ForwardCache<Scalar>& cache) const {
    check_inputs(params, in);
    const Eigen::Index batch = in.size();
    cache.valid = false;
    cache.batch = batch;
    const Matrix<Scalar> local = detail::run_branch(layout_.local, params, in.local, spec_.in_channels,
                                                    cache.local_cols, cache.local_act);
    const Matrix<Scalar> global = detail::run_branch(layout_.global, params, in.global, spec_.in_channels,
                                                     cache.global_cols, cache.global_act);
    cache.features.resize(layout_.feature_count(), batch);
    cache.features.topRows(layout_.local_features) = local;
    cache.features.middleRows(layout_.local_features, layout_.global_features) = global;
    cache.features.bottomRows(1) = in.budget;

    cache.dense_act.resize(layout_.dense.size());
    const Matrix<Scalar>* x = &cache.features;
    for (std::size_t i = 0; i < layout_.dense.size(); ++i) {
      const DenseLayout& l = layout_.dense[i];
      const Eigen::Map<const Matrix<Scalar>> w(params.data() + l.weight_offset, l.out, l.in);
      const Eigen::Map<const Vector<Scalar>> bias(params.data() + l.bias_offset, l.out);
      Matrix<Scalar>& z = cache.dense_act[i];
      z.noalias() = w * (*x);
      z.colwise() += bias;
      if (i + 1 < layout_.dense.size()) z = z.cwiseMax(Scalar(0));
      x = &z;
    }
    cache.valid = true;
    return cache.dense_act.back();
  }

  Matrix<Scalar> forward(const Vector<Scalar>& params, const Batch<Scalar>& in) const {
    ForwardCache<Scalar> cache;
    return forward(params, in, cache);
  }

  /// Gradient of sum_ij upstream(i, j) * Q(i, j) with respect to every parameter.
  /// Throws std::logic_error if `cache` holds no forward pass.
  Vector<Scalar> backward(const Vector<Scalar>& params, const ForwardCache<Scalar>& cache,
                          const Matrix<Scalar>& upstream) const {
    if (!cache.valid) throw std::logic_error("backward called without a cached forward pass");
    const Eigen::Index batch = cache.batch;
    if (upstream.rows() != spec_.action_count() || upstream.cols() != batch) {
      throw std::invalid_argument("backward: upstream gradient shape mismatch");
    }
    Vector<Scalar> grad = Vector<Scalar>::Zero(static_cast<Eigen::Index>(layout_.parameter_count));
    Matrix<Scalar> dz = upstream;
    for (std::size_t i = layout_.dense.size(); i-- > 0;) {
      const DenseLayout& l = layout_.dense[i];
      if (i + 1 < layout_.dense.size()) {
        dz = dz.cwiseProduct((cache.dense_act[i].array() > Scalar(0)).matrix().template cast<Scalar>());
      }
      const Matrix<Scalar>& x = i == 0 ? cache.features : cache.dense_act[i - 1];
      Eigen::Map<Matrix<Scalar>> dw(grad.data() + l.weight_offset, l.out, l.in);
      Eigen::Map<Vector<Scalar>> db(grad.data() + l.bias_offset, l.out);
      dw.noalias() = dz * x.transpose();
      db = dz.rowwise().sum();
      const Eigen::Map<const Matrix<Scalar>> w(params.data() + l.weight_offset, l.out, l.in);
      Matrix<Scalar> dx = w.transpose() * dz;
      dz = std::move(dx);
    }
    detail::backprop_branch(layout_.local, params, cache.local_cols, cache.local_act,
                            Matrix<Scalar>(dz.topRows(layout_.local_features)), batch, grad);
    detail::backprop_branch(layout_.global, params, cache.global_cols, cache.global_act,
                            Matrix<Scalar>(dz.middleRows(layout_.local_features, layout_.global_features)),
                            batch, grad);
    return grad;
  }

 private:
  void check_inputs(const Vector<Scalar>& params, const Batch<Scalar>& in) const {
    if (static_cast<std::size_t>(params.size()) != layout_.parameter_count) {
      throw std::invalid_argument("forward: parameter vector has the wrong length");
    }
    const Eigen::Index local_rows = static_cast<Eigen::Index>(spec_.in_channels) * spec_.local_size * spec_.local_size;
    const Eigen::Index global_rows = static_cast<Eigen::Index>(spec_.in_channels) * spec_.global_size * spec_.global_size;
    const Eigen::Index batch = in.local.cols();
    if (in.local.rows() != local_rows || in.global.rows() != global_rows || in.budget.rows() != 1 ||
        in.global.cols() != batch || in.budget.cols() != batch || batch < 1) {
      throw std::invalid_argument("forward: input shapes do not match the network spec");
    }
  }

  QNetworkSpec spec_;
  NetworkLayout layout_;
};

/// He-normal weights (variance 2 / fan_in), zero biases.
template <typename Scalar>
NetworkParams<Scalar> init_params(const QNetworkSpec& spec, RngStream& rng) {
  const NetworkLayout layout(spec);
  NetworkParams<Scalar> params;
  params.values = Vector<Scalar>::Zero(static_cast<Eigen::Index>(layout.parameter_count));
  auto fill = [&](std::size_t offset, std::size_t count, double fan_in) {
    const double sd = std::sqrt(2.0 / fan_in);
    for (std::size_t i = 0; i < count; ++i) {
      params.values(static_cast<Eigen::Index>(offset + i)) = static_cast<Scalar>(next_normal(rng, 0.0, sd));
    }
    params.layer_offsets.push_back(offset);
  };
  for (const auto* branch : {&layout.local, &layout.global}) {
    for (const ConvLayout& l : *branch) {
      const std::size_t fan_in = static_cast<std::size_t>(l.in_channels) * l.kernel * l.kernel;
      fill(l.weight_offset, fan_in * l.out_channels, static_cast<double>(fan_in));
    }
  }
  for (const DenseLayout& l : layout.dense) {
    fill(l.weight_offset, static_cast<std::size_t>(l.in) * l.out, l.in);
  }
  return params;
}

/// Smooth-L1 (Huber with transition point beta) of d = y_hat - y and its
/// derivative with respect to y_hat.
struct LossValue {
  double loss = 0.0;
  double grad = 0.0;
};
LossValue smooth_l1(double y_hat, double y, double beta = 1.0);

template <typename Scalar>
struct AdamState {
  Vector<Scalar> m;
  Vector<Scalar> v;
  long t = 0;
  double lr = 3e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  AdamState() = default;
  AdamState(Eigen::Index n, double learning_rate)
      : m(Vector<Scalar>::Zero(n)), v(Vector<Scalar>::Zero(n)), lr(learning_rate) {}
};

/// One bias-corrected Adam update of `params` in place.
template <typename Scalar>
void adam_step(Vector<Scalar>& params, const Vector<Scalar>& grads, AdamState<Scalar>& state) {
  if (grads.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
    throw std::invalid_argument("adam_step: length mismatch");
  }
  ++state.t;
  const Scalar b1 = static_cast<Scalar>(state.beta1);
  const Scalar b2 = static_cast<Scalar>(state.beta2);
  state.m = b1 * state.m + (Scalar(1) - b1) * grads;
  state.v = b2 * state.v + (Scalar(1) - b2) * grads.cwiseAbs2();
  const Scalar c1 = static_cast<Scalar>(1.0 - std::pow(state.beta1, static_cast<double>(state.t)));
  const Scalar c2 = static_cast<Scalar>(1.0 - std::pow(state.beta2, static_cast<double>(state.t)));
  const Scalar lr = static_cast<Scalar>(state.lr);
  const Scalar eps = static_cast<Scalar>(state.eps);
  params.array() -= lr * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + eps);
}

/// Checkpoint: 8-byte magic "UAVQNET1", u32 format version, u32 byte-order tag
/// 0x01020304, u64 spec hash, u64 parameter count, then the parameters as
/// IEEE-754 binary32; every field little-endian.
void save_params(const std::filesystem::path& path, const QNetworkSpec& spec, const Vector<float>& params);

/// Throws std::runtime_error on I/O or format problems and on a spec-hash or
/// parameter-count mismatch.
Vector<float> load_params(const std::filesystem::path& path, const QNetworkSpec& spec);

struct CheckpointHeader {
  std::uint32_t version = 0;
  std::uint64_t spec_hash = 0;
  std::uint64_t parameter_count = 0;
};
CheckpointHeader read_checkpoint_header(const std::filesystem::path& path);

}  // namespace uavsearch::nn
