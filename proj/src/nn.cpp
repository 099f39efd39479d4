#include "asdkit/nn.hpp"

#include <cmath>
#include <cstring>
#include <numeric>

#include "asdkit/error.hpp"

namespace asdkit::nn {
namespace {

constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
void put_raw(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T get_raw(const std::string& in, std::size_t& pos, const char* what) {
  if (pos + sizeof(T) > in.size()) throw ParseError(std::string("checkpoint: truncated at ") + what);
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

void apply_activation(Activation a, const Matrix& pre, Matrix& post) {
  if (a == Activation::kRelu) {
    post = pre.cwiseMax(0.0);
  } else {
    post = pre;
  }
}

bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace

std::vector<int> Network::dims() const {
  std::vector<int> d;
  if (layers.empty()) return d;
  d.push_back(static_cast<int>(in_dim()));
  for (const auto& l : layers) d.push_back(static_cast<int>(l.out_dim()));
  return d;
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += static_cast<std::size_t>(l.weights.size() + l.biases.size());
  return n;
}

Network init_network(std::span<const int> dims, std::span<const Activation> activations,
                     std::uint64_t seed) {
  if (dims.size() < 2) throw ConfigError("init_network: need at least two layer sizes");
  if (activations.size() != dims.size() - 1) {
    throw ConfigError("init_network: " + std::to_string(activations.size()) + " activations for " +
                      std::to_string(dims.size() - 1) + " layers");
  }
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (dims[i] <= 0) throw ConfigError("init_network: layer size " + std::to_string(i) + " is not positive");
  }
  Network net;
  net.seed = seed;
  Rng rng(seed);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    DenseLayer layer;
    const int fan_in = dims[l], fan_out = dims[l + 1];
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    layer.weights.resize(fan_out, fan_in);
    // Row-major fill order keeps the draw sequence independent of storage order.
    for (int r = 0; r < fan_out; ++r) {
      for (int c = 0; c < fan_in; ++c) layer.weights(r, c) = rng.uniform(-limit, limit);
    }
    layer.biases = Vector::Zero(fan_out);
    layer.activation = activations[l];
    net.layers.push_back(std::move(layer));
  }
  return net;
}

ForwardRecord forward(const Network& net, const Matrix& batch) {
  if (net.layers.empty()) throw ConfigError("forward: empty network");
  ForwardRecord rec;
  rec.pre.resize(net.layers.size());
  rec.post.resize(net.layers.size() + 1);
  rec.post[0] = batch;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const DenseLayer& layer = net.layers[l];
    const Matrix& in = rec.post[l];
    if (in.cols() != layer.in_dim()) {
      throw DimensionError("forward: layer " + std::to_string(l) + " expects width " +
                           std::to_string(layer.in_dim()) + ", got " + std::to_string(in.cols()));
    }
    Matrix& z = rec.pre[l];
    z.noalias() = in * layer.weights.transpose();
    z.rowwise() += layer.biases.transpose();
    apply_activation(layer.activation, z, rec.post[l + 1]);
  }
  return rec;
}

Matrix predict(const Network& net, const Matrix& batch) {
  if (net.layers.empty()) throw ConfigError("predict: empty network");
  Matrix cur = batch;
  Matrix z;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const DenseLayer& layer = net.layers[l];
    if (cur.cols() != layer.in_dim()) {
      throw DimensionError("predict: layer " + std::to_string(l) + " expects width " +
                           std::to_string(layer.in_dim()) + ", got " + std::to_string(cur.cols()));
    }
    z.noalias() = cur * layer.weights.transpose();
    z.rowwise() += layer.biases.transpose();
    apply_activation(layer.activation, z, cur);
  }
  return cur;
}

Gradients backward(const Network& net, const ForwardRecord& record, const Matrix& loss_grad) {
  const std::size_t n = net.layers.size();
  if (record.pre.size() != n || record.post.size() != n + 1) {
    throw DimensionError("backward: activation record does not match the network depth");
  }
  const Matrix& out = record.output();
  if (loss_grad.rows() != out.rows() || loss_grad.cols() != out.cols() || out.cols() != net.out_dim()) {
    throw DimensionError("backward: loss gradient shape does not match the recorded output");
  }
  Gradients g;
  g.layers.resize(n);
  Matrix upstream = loss_grad;
  for (std::size_t i = n; i-- > 0;) {
    const DenseLayer& layer = net.layers[i];
    if (record.pre[i].cols() != layer.out_dim() || record.post[i].cols() != layer.in_dim()) {
      throw DimensionError("backward: stale activations at layer " + std::to_string(i));
    }
    if (layer.activation == Activation::kRelu) {
      upstream = upstream.cwiseProduct((record.pre[i].array() > 0.0).cast<double>().matrix());
    }
    g.layers[i].weights.noalias() = upstream.transpose() * record.post[i];
    g.layers[i].biases = upstream.colwise().sum().transpose();
    Matrix next;
    next.noalias() = upstream * layer.weights;
    upstream = std::move(next);
  }
  g.input = std::move(upstream);
  return g;
}

LossValue mse_loss(const Matrix& pred, const Matrix& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    throw DimensionError("mse_loss: prediction " + std::to_string(pred.rows()) + "x" +
                         std::to_string(pred.cols()) + " vs target " + std::to_string(target.rows()) +
                         "x" + std::to_string(target.cols()));
  }
  if (pred.rows() == 0) throw DimensionError("mse_loss: empty batch");
  const double b = static_cast<double>(pred.rows());
  LossValue out;
  Matrix diff = pred - target;
  out.loss = diff.squaredNorm() / b;
  out.grad = (2.0 / b) * diff;
  return out;
}

Matrix log_softmax(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double mx = logits.row(r).maxCoeff();
    const double lse = mx + std::log((logits.row(r).array() - mx).exp().sum());
    out.row(r) = logits.row(r).array() - lse;
  }
  return out;
}

LossValue softmax_xent_loss(const Matrix& logits, std::span<const int> labels) {
  if (static_cast<Eigen::Index>(labels.size()) != logits.rows()) {
    throw DimensionError("softmax_xent_loss: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(logits.rows()) + " rows");
  }
  if (logits.rows() == 0) throw DimensionError("softmax_xent_loss: empty batch");
  const auto k = logits.cols();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= k) {
      throw ConfigError("softmax_xent_loss: label " + std::to_string(labels[i]) + " at row " +
                        std::to_string(i) + " outside [0, " + std::to_string(k) + ")");
    }
  }
  const double b = static_cast<double>(logits.rows());
  const Matrix logp = log_softmax(logits);
  LossValue out;
  out.grad = logp.array().exp().matrix();
  double total = 0.0;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    total -= logp(r, labels[r]);
    out.grad(r, labels[r]) -= 1.0;
  }
  out.loss = total / b;
  out.grad /= b;
  return out;
}

AdamState AdamState::for_network(const Network& net, double learning_rate) {
  AdamState s;
  s.learning_rate = learning_rate;
  for (const auto& l : net.layers) {
    s.m.push_back({Matrix::Zero(l.weights.rows(), l.weights.cols()), Vector::Zero(l.biases.size())});
    s.v.push_back({Matrix::Zero(l.weights.rows(), l.weights.cols()), Vector::Zero(l.biases.size())});
  }
  return s;
}

void adam_step(Network& net, const Gradients& grads, AdamState& state) {
  const std::size_t n = net.layers.size();
  if (grads.layers.size() != n || state.m.size() != n || state.v.size() != n) {
    throw DimensionError("adam_step: gradient/state depth does not match the network");
  }
  if (state.step_count < 0) throw ConfigError("adam_step: negative step count");
  for (std::size_t i = 0; i < n; ++i) {
    const auto& g = grads.layers[i];
    const auto& l = net.layers[i];
    if (g.weights.rows() != l.weights.rows() || g.weights.cols() != l.weights.cols() ||
        g.biases.size() != l.biases.size()) {
      throw DimensionError("adam_step: gradient shape mismatch at layer " + std::to_string(i));
    }
    if (!all_finite(g.weights) || !g.biases.allFinite()) {
      throw NumericError("adam_step: non-finite gradient at layer " + std::to_string(i));
    }
  }
  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  const double b1 = state.beta1, b2 = state.beta2, lr = state.learning_rate, eps = state.epsilon;
  auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseAbs2();
    param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  };
  for (std::size_t i = 0; i < n; ++i) {
    update(net.layers[i].weights, state.m[i].weights, state.v[i].weights, grads.layers[i].weights);
    update(net.layers[i].biases, state.m[i].biases, state.v[i].biases, grads.layers[i].biases);
  }
}

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be finite and >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("ADAM betas must be in [0, 1)");
  if (!(epsilon > 0.0)) throw ConfigError("ADAM epsilon must be positive");
}

TrainResult run_epochs(Eigen::Index n_rows, const BatchBuilder& build, const StepFunction& step,
                       const TrainConfig& cfg) {
  cfg.validate();
  if (n_rows <= 0) throw DataError("train: no training rows");
  Rng shuffle_rng(mix_seed(cfg.seed, 1));
  Rng batch_rng(mix_seed(cfg.seed, 2));
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n_rows));
  TrainResult result;
  result.loss_history.reserve(cfg.epochs);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[shuffle_rng.below(i)]);
    }
    double weighted = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t len = std::min<std::size_t>(cfg.batch_size, order.size() - start);
      const std::span<const Eigen::Index> rows(order.data() + start, len);
      const double loss = step(build(rows, batch_rng));
      if (!std::isfinite(loss)) {
        throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch));
      }
      weighted += loss * static_cast<double>(len);
    }
    result.loss_history.push_back(weighted / static_cast<double>(order.size()));
  }
  return result;
}

AdamState AdamState::for_training(const Network& net, const TrainConfig& cfg) {
  AdamState state = for_network(net, cfg.learning_rate);
  state.beta1 = cfg.beta1;
  state.beta2 = cfg.beta2;
  state.epsilon = cfg.epsilon;
  return state;
}

TrainResult train(Network& net, Eigen::Index n_rows, const BatchBuilder& build,
                  const LossFunction& loss, const TrainConfig& cfg) {
  AdamState state = AdamState::for_training(net, cfg);
  auto step = [&](const Minibatch& mb) {
    const ForwardRecord rec = forward(net, mb.inputs);
    const LossValue lv = loss(rec.output(), mb);
    if (std::isfinite(lv.loss)) adam_step(net, backward(net, rec, lv.grad), state);
    return lv.loss;
  };
  return run_epochs(n_rows, build, step, cfg);
}

TrainResult train(Network& net, const Matrix& data, const Matrix& targets, const TrainConfig& cfg) {
  if (data.rows() == 0) throw DataError("train: empty data");
  if (targets.rows() != data.rows()) throw DimensionError("train: targets not aligned with data");
  auto build = [&](std::span<const Eigen::Index> rows, Rng&) {
    Minibatch mb;
    const std::vector<Eigen::Index> idx(rows.begin(), rows.end());
    mb.inputs = data(idx, Eigen::all);
    mb.targets = targets(idx, Eigen::all);
    return mb;
  };
  auto loss = [](const Matrix& out, const Minibatch& mb) { return mse_loss(out, mb.targets); };
  return train(net, data.rows(), build, loss, cfg);
}

TrainResult train(Network& net, const Matrix& data, std::span<const int> labels,
                  const TrainConfig& cfg) {
  if (data.rows() == 0) throw DataError("train: empty data");
  if (static_cast<Eigen::Index>(labels.size()) != data.rows()) {
    throw DimensionError("train: labels not aligned with data");
  }
  auto build = [&](std::span<const Eigen::Index> rows, Rng&) {
    Minibatch mb;
    const std::vector<Eigen::Index> idx(rows.begin(), rows.end());
    mb.inputs = data(idx, Eigen::all);
    mb.labels.reserve(rows.size());
    for (auto r : rows) mb.labels.push_back(labels[static_cast<std::size_t>(r)]);
    return mb;
  };
  auto loss = [](const Matrix& out, const Minibatch& mb) { return softmax_xent_loss(out, mb.labels); };
  return train(net, data.rows(), build, loss, cfg);
}

std::string encode_checkpoint(const Network& net, std::uint64_t config_hash) {
  std::string out = "ASDNET01";
  put_raw<std::uint32_t>(out, kCheckpointVersion);
  put_raw<std::uint32_t>(out, static_cast<std::uint32_t>(net.layers.size()));
  for (int d : net.dims()) put_raw<std::uint32_t>(out, static_cast<std::uint32_t>(d));
  for (const auto& l : net.layers) put_raw<std::uint32_t>(out, static_cast<std::uint32_t>(l.activation));
  put_raw<std::uint64_t>(out, net.seed);
  put_raw<std::uint64_t>(out, config_hash);
  put_raw<std::uint64_t>(out, net.parameter_count());
  for (const auto& l : net.layers) {
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) put_raw<double>(out, l.weights(r, c));
    }
    for (Eigen::Index r = 0; r < l.biases.size(); ++r) put_raw<double>(out, l.biases[r]);
  }
  return out;
}

Checkpoint decode_checkpoint(const std::string& in) {
  if (in.size() < 8 || in.compare(0, 8, "ASDNET01") != 0) throw ParseError("checkpoint: bad magic");
  std::size_t pos = 8;
  const auto version = get_raw<std::uint32_t>(in, pos, "version");
  if (version != kCheckpointVersion) {
    throw ParseError("checkpoint: unsupported version " + std::to_string(version));
  }
  const auto n = get_raw<std::uint32_t>(in, pos, "layer count");
  if (n == 0 || n > 4096) throw ParseError("checkpoint: implausible layer count " + std::to_string(n));
  std::vector<int> dims(n + 1);
  for (auto& d : dims) {
    const auto v = get_raw<std::uint32_t>(in, pos, "dims");
    if (v == 0 || v > (1u << 24)) throw ParseError("checkpoint: invalid layer size " + std::to_string(v));
    d = static_cast<int>(v);
  }
  std::vector<Activation> acts(n);
  for (auto& a : acts) {
    const auto v = get_raw<std::uint32_t>(in, pos, "activations");
    if (v > 1) throw ParseError("checkpoint: unknown activation code " + std::to_string(v));
    a = static_cast<Activation>(v);
  }
  Checkpoint ck;
  const auto seed = get_raw<std::uint64_t>(in, pos, "seed");
  ck.config_hash = get_raw<std::uint64_t>(in, pos, "config hash");
  const auto count = get_raw<std::uint64_t>(in, pos, "parameter count");
  std::uint64_t expected = 0;
  for (std::uint32_t l = 0; l < n; ++l) {
    expected += static_cast<std::uint64_t>(dims[l + 1]) * dims[l] + dims[l + 1];
  }
  if (count != expected) {
    throw ParseError("checkpoint: parameter count " + std::to_string(count) + " does not match dims (" +
                     std::to_string(expected) + ")");
  }
  if (in.size() - pos != expected * sizeof(double)) throw ParseError("checkpoint: payload length mismatch");
  ck.network.seed = seed;
  for (std::uint32_t l = 0; l < n; ++l) {
    DenseLayer layer;
    layer.activation = acts[l];
    layer.weights.resize(dims[l + 1], dims[l]);
    for (int r = 0; r < dims[l + 1]; ++r) {
      for (int c = 0; c < dims[l]; ++c) layer.weights(r, c) = get_raw<double>(in, pos, "weights");
    }
    layer.biases.resize(dims[l + 1]);
    for (int r = 0; r < dims[l + 1]; ++r) layer.biases[r] = get_raw<double>(in, pos, "biases");
    ck.network.layers.push_back(std::move(layer));
  }
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Network& net, std::uint64_t config_hash) {
  write_file_atomic(path, encode_checkpoint(net, config_hash));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file(path));
}

}  // namespace asdkit::nn
