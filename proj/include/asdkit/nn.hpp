#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "asdkit/features.hpp"
#include "asdkit/util.hpp"

namespace asdkit::nn {

enum class Activation : std::uint8_t { kIdentity = 0, kRelu = 1 };

struct DenseLayer {
  Matrix weights;  // out_dim x in_dim
  Vector biases;   // out_dim
  Activation activation = Activation::kIdentity;

  Eigen::Index in_dim() const { return weights.cols(); }
  Eigen::Index out_dim() const { return weights.rows(); }
};

struct Network {
  std::vector<DenseLayer> layers;
  std::uint64_t seed = 0;

  Eigen::Index in_dim() const { return layers.front().in_dim(); }
  Eigen::Index out_dim() const { return layers.back().out_dim(); }
  /// Layer sizes (in_dim, out_1, ..., out_n).
  std::vector<int> dims() const;
  std::size_t parameter_count() const;
};

/// Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases.
/// The same seed always yields bit-identical parameters.
Network init_network(std::span<const int> dims, std::span<const Activation> activations,
                     std::uint64_t seed);

/// Per-layer intermediates of one forward pass. post[0] is the input batch,
/// pre[l] / post[l + 1] are layer l's pre- and post-activation.
struct ForwardRecord {
  std::vector<Matrix> pre;
  std::vector<Matrix> post;

  const Matrix& output() const { return post.back(); }
};

/// `batch` is B x in_dim, one sample per row.
ForwardRecord forward(const Network& net, const Matrix& batch);
/// Output only; skips retaining intermediates.
Matrix predict(const Network& net, const Matrix& batch);

struct LayerGrad {
  Matrix weights;
  Vector biases;
};

struct Gradients {
  std::vector<LayerGrad> layers;
  /// d loss / d input batch.
  Matrix input;
};

/// Backpropagates `loss_grad` (d loss / d output, B x out_dim).
Gradients backward(const Network& net, const ForwardRecord& record, const Matrix& loss_grad);

struct LossValue {
  double loss = 0.0;
  Matrix grad;  // d loss / d prediction
};

/// Mean over rows of the squared l2 row error.
LossValue mse_loss(const Matrix& pred, const Matrix& target);

/// Mean over rows of -log softmax(logits)[label].
LossValue softmax_xent_loss(const Matrix& logits, std::span<const int> labels);

/// Row-wise log-softmax, computed with the max-shift.
Matrix log_softmax(const Matrix& logits);

struct TrainConfig {
  int epochs = 100;
  int batch_size = 512;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;

  void validate() const;
};

struct AdamState {
  std::vector<LayerGrad> m;
  std::vector<LayerGrad> v;
  std::int64_t step_count = 0;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState for_network(const Network& net, double learning_rate = 1e-3);
  /// Learning rate and moment constants taken from `cfg`.
  static AdamState for_training(const Network& net, const TrainConfig& cfg);
};

/// One bias-corrected ADAM update in place. Throws NumericError on a
/// non-finite gradient before touching any parameter.
void adam_step(Network& net, const Gradients& grads, AdamState& state);

struct TrainResult {
  /// Per epoch, the row-weighted mean of the minibatch losses.
  std::vector<double> loss_history;
};

/// One minibatch as the objective sees it. Builders fill whichever of
/// targets / labels / row_weights their loss needs.
struct Minibatch {
  Matrix inputs;
  Matrix targets;
  std::vector<int> labels;
  Vector row_weights;
};

using BatchBuilder = std::function<Minibatch(std::span<const Eigen::Index> rows, Rng& rng)>;
using LossFunction = std::function<LossValue(const Matrix& output, const Minibatch& batch)>;

/// Runs one optimizer update on a minibatch and returns its loss.
using StepFunction = std::function<double(const Minibatch& batch)>;

/// The epoch loop shared by every trainer: each epoch draws one seeded
/// permutation of the `n_rows` rows and walks it in consecutive batches (the
/// last may be short). Throws NumericError on a non-finite batch loss.
TrainResult run_epochs(Eigen::Index n_rows, const BatchBuilder& build, const StepFunction& step,
                       const TrainConfig& cfg);

/// Minibatch ADAM over `n_rows` training rows: each epoch draws one seeded
/// permutation and walks it in consecutive batches (the last may be short).
TrainResult train(Network& net, Eigen::Index n_rows, const BatchBuilder& build,
                  const LossFunction& loss, const TrainConfig& cfg);

/// Regression with mse_loss.
TrainResult train(Network& net, const Matrix& data, const Matrix& targets, const TrainConfig& cfg);

/// Classification with softmax_xent_loss.
TrainResult train(Network& net, const Matrix& data, std::span<const int> labels,
                  const TrainConfig& cfg);

/// Binary checkpoint:
///   "ASDNET01", u32 version (1), u32 layer count n, u32 dims[n + 1],
///   u32 activation[n], u64 init seed, u64 config hash, u64 parameter count,
///   then float64 parameters: per layer weights row-major, then biases.
/// All integers and floats little-endian.
std::string encode_checkpoint(const Network& net, std::uint64_t config_hash);

struct Checkpoint {
  Network network;
  std::uint64_t config_hash = 0;
};

/// Validates magic, version, dims and payload length before accepting.
Checkpoint decode_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const Network& net, std::uint64_t config_hash);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace asdkit::nn
