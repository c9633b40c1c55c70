// Minibatch SGD with L2 weight decay and a geometric learning-rate schedule.
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "deepbf/nn/network.hpp"

namespace deepbf::nn {

struct TrainConfig {
  double lr_start = 1e-3;
  double lr_end = 1e-5;
  double weight_decay = 1e-4;
  /// Heavy-ball momentum; 0 gives plain SGD.
  double momentum = 0.0;
  int epochs = 200;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;

  void validate() const;
};

/// lr_start * (lr_end / lr_start)^(epoch / (epochs - 1)).
double lr_at(double epoch, const TrainConfig& cfg);

/// p <- p - lr * (g + weight_decay * p); blocks flagged weight_decay = false skip the decay term.
void sgd_step(std::span<ParamRef> params, double lr, double weight_decay);

/// Momentum variant: v <- momentum * v + (g + wd * p); p <- p - lr * v.
/// With momentum = 0 this is exactly sgd_step.
class SgdOptimizer {
 public:
  SgdOptimizer(double momentum, double weight_decay) : momentum_(momentum), weight_decay_(weight_decay) {}
  void step(std::span<ParamRef> params, double lr);

 private:
  double momentum_;
  double weight_decay_;
  std::vector<std::vector<double>> velocity_;
};

/// Training/validation samples, materialized on demand. `rng` is seeded per
/// (epoch, sample) so sources may draw random augmentation deterministically.
class SampleSource {
 public:
  virtual ~SampleSource() = default;
  virtual std::size_t size() const = 0;
  /// Per-sample shapes with n = 1.
  virtual Shape4 input_shape() const = 0;
  virtual Shape4 target_shape() const = 0;
  virtual void load(std::size_t index, Rng& rng, double* input, double* target) const = 0;
};

/// Fixed (input, target) pairs held in memory.
class TensorDataset : public SampleSource {
 public:
  TensorDataset(Shape4 input_shape, Shape4 target_shape);
  void add(std::span<const double> input, std::span<const double> target);

  std::size_t size() const override { return inputs_.size(); }
  Shape4 input_shape() const override { return in_; }
  Shape4 target_shape() const override { return out_; }
  void load(std::size_t index, Rng& rng, double* input, double* target) const override;

 private:
  Shape4 in_, out_;
  std::vector<std::vector<double>> inputs_, targets_;
};

/// Mean squared error over all elements; writes dL/dy when grad is non-null.
double mse_loss(const Tensor4& y, const Tensor4& target, Tensor4* grad);

/// Seed for sample `index` in `epoch`.
std::uint64_t sample_seed(std::uint64_t base, std::uint64_t epoch, std::uint64_t index);

/// Batch of samples [first, first + count) of `order`.
void load_batch(const SampleSource& src, std::span<const std::size_t> indices, std::uint64_t base_seed,
                std::uint64_t epoch, Tensor4& inputs, Tensor4& targets);

/// Eval-mode mean loss with the fixed validation draw.
double evaluate_loss(const SampleSource& src, Network& net, std::size_t batch_size, std::uint64_t seed);

struct TrainHooks {
  const SampleSource* validation = nullptr;
  /// Called after each epoch with (epoch, train loss, validation loss or NaN).
  std::function<void(int, double, double)> on_epoch;
};

struct TrainResult {
  std::vector<double> loss_history;
  std::vector<double> val_history;
};

/// Raised when the loss becomes NaN or infinite.
class TrainingDiverged : public Error {
 public:
  using Error::Error;
};

TrainResult train(const SampleSource& data, Network& net, const TrainConfig& cfg,
                  const TrainHooks& hooks = {});

}  // namespace deepbf::nn
