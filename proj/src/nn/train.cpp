#include "deepbf/nn/train.hpp"

#include <cmath>
#include <limits>
#include <numeric>

namespace deepbf::nn {

void TrainConfig::validate() const {
  if (!(lr_start > lr_end && lr_end > 0)) throw Error("train: need lr_start > lr_end > 0");
  if (epochs < 1) throw Error("train: epochs must be >= 1");
  if (batch_size < 1) throw Error("train: batch_size must be >= 1");
  if (weight_decay < 0) throw Error("train: weight_decay must be >= 0");
  if (momentum < 0 || momentum >= 1) throw Error("train: momentum must lie in [0, 1)");
}

double lr_at(double epoch, const TrainConfig& cfg) {
  if (cfg.epochs <= 1) return cfg.lr_start;
  const double t = epoch / static_cast<double>(cfg.epochs - 1);
  return cfg.lr_start * std::pow(cfg.lr_end / cfg.lr_start, t);
}

void sgd_step(std::span<ParamRef> params, double lr, double weight_decay) {
  for (auto& p : params) {
    if (p.value.size() != p.grad.size()) throw Error("sgd_step: parameter/gradient size mismatch");
    const double wd = p.weight_decay ? weight_decay : 0.0;
    for (std::size_t i = 0; i < p.value.size(); ++i)
      p.value[i] -= lr * (p.grad[i] + wd * p.value[i]);
  }
}

void SgdOptimizer::step(std::span<ParamRef> params, double lr) {
  if (momentum_ == 0.0) {
    sgd_step(params, lr, weight_decay_);
    return;
  }
  if (velocity_.size() != params.size()) {
    velocity_.clear();
    for (const auto& p : params) velocity_.emplace_back(p.value.size(), 0.0);
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = params[k];
    auto& v = velocity_[k];
    if (v.size() != p.value.size()) throw Error("optimizer: parameter layout changed");
    const double wd = p.weight_decay ? weight_decay_ : 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      v[i] = momentum_ * v[i] + (p.grad[i] + wd * p.value[i]);
      p.value[i] -= lr * v[i];
    }
  }
}

TensorDataset::TensorDataset(Shape4 input_shape, Shape4 target_shape)
    : in_(input_shape), out_(target_shape) {
  in_.n = out_.n = 1;
}

void TensorDataset::add(std::span<const double> input, std::span<const double> target) {
  if (input.size() != in_.size() || target.size() != out_.size())
    throw Error("dataset: sample does not match the declared shapes");
  inputs_.emplace_back(input.begin(), input.end());
  targets_.emplace_back(target.begin(), target.end());
}

void TensorDataset::load(std::size_t index, Rng&, double* input, double* target) const {
  std::copy(inputs_.at(index).begin(), inputs_[index].end(), input);
  std::copy(targets_.at(index).begin(), targets_[index].end(), target);
}

double mse_loss(const Tensor4& y, const Tensor4& target, Tensor4* grad) {
  if (y.shape() != target.shape())
    throw Error("loss: output " + y.shape().str() + " vs target " + target.shape().str());
  const double m = static_cast<double>(y.size());
  if (grad) *grad = Tensor4(y.shape());
  double se = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double d = y.data()[i] - target.data()[i];
    se += d * d;
    if (grad) grad->data()[i] = 2.0 * d / m;
  }
  return se / m;
}

std::uint64_t sample_seed(std::uint64_t base, std::uint64_t epoch, std::uint64_t index) {
  // splitmix64 finalizer over a simple combination.
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (epoch + 1) + 0xBF58476D1CE4E5B9ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

void load_batch(const SampleSource& src, std::span<const std::size_t> indices, std::uint64_t base_seed,
                std::uint64_t epoch, Tensor4& inputs, Tensor4& targets) {
  Shape4 si = src.input_shape(), st = src.target_shape();
  si.n = st.n = indices.size();
  if (inputs.shape() != si) inputs = Tensor4(si);
  if (targets.shape() != st) targets = Tensor4(st);
  for (std::size_t b = 0; b < indices.size(); ++b) {
    Rng rng(sample_seed(base_seed, epoch, indices[b]));
    src.load(indices[b], rng, inputs.sample(b), targets.sample(b));
  }
}

namespace {
constexpr std::uint64_t kValidationEpoch = std::numeric_limits<std::uint64_t>::max() - 1;
}

double evaluate_loss(const SampleSource& src, Network& net, std::size_t batch_size, std::uint64_t seed) {
  if (src.size() == 0) return std::numeric_limits<double>::quiet_NaN();
  std::vector<std::size_t> idx(src.size());
  std::iota(idx.begin(), idx.end(), 0);
  Tensor4 x, t;
  double total = 0.0;
  for (std::size_t first = 0; first < idx.size(); first += batch_size) {
    const std::size_t count = std::min(batch_size, idx.size() - first);
    load_batch(src, std::span(idx).subspan(first, count), seed, kValidationEpoch, x, t);
    total += mse_loss(net.forward(x, Mode::Eval), t, nullptr) * static_cast<double>(count);
  }
  return total / static_cast<double>(idx.size());
}

TrainResult train(const SampleSource& data, Network& net, const TrainConfig& cfg,
                  const TrainHooks& hooks) {
  cfg.validate();
  if (data.size() == 0) throw Error("train: empty dataset");

  TrainResult result;
  Rng shuffle_rng(cfg.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  SgdOptimizer opt(cfg.momentum, cfg.weight_decay);
  auto params = net.parameters();
  Tensor4 x, t, grad;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.below(i)]);
    const double lr = lr_at(epoch, cfg);
    double total = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t first = 0; first < order.size(); first += cfg.batch_size, ++batch_index) {
      const std::size_t count = std::min(cfg.batch_size, order.size() - first);
      load_batch(data, std::span(order).subspan(first, count), cfg.seed,
                 static_cast<std::uint64_t>(epoch), x, t);
      net.zero_grad();
      const double loss = mse_loss(net.forward(x, Mode::Train), t, &grad);
      if (!std::isfinite(loss))
        throw TrainingDiverged("loss became " + std::to_string(loss) + " at epoch " +
                               std::to_string(epoch) + ", batch " + std::to_string(batch_index) +
                               " (lr " + std::to_string(lr) + ")");
      net.backward(grad);
      opt.step(params, lr);
      total += loss * static_cast<double>(count);
    }
    net.clear_cache();
    result.loss_history.push_back(total / static_cast<double>(order.size()));
    const double val = hooks.validation
                           ? evaluate_loss(*hooks.validation, net, cfg.batch_size, cfg.seed)
                           : std::numeric_limits<double>::quiet_NaN();
    result.val_history.push_back(val);
    if (hooks.on_epoch) hooks.on_epoch(epoch, result.loss_history.back(), val);
  }
  return result;
}

}  // namespace deepbf::nn
