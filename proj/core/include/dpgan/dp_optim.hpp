#pragma once

#include <span>
#include <vector>

#include "dpgan/grad_vector.hpp"
#include "dpgan/rng.hpp"
#include "dpgan/tensor.hpp"

namespace dpgan {

/// Differentially private SGD settings for the discriminator updates.
struct DpSgdConfig {
  double clip_bound = 1.0;     // C, per-example L2 cap
  double noise_scale = 1.0;    // sigma; noise std is sigma * C
  double lot_size = 64.0;      // L, expected lot size and the fixed aggregation divisor
  double learning_rate = 0.05; // eta
  double clip_decay = 1.0;     // C *= clip_decay once per generator iteration; 1 disables
  double decay_floor = 1e-3;   // C never decays below this

  void validate() const;  // throws ConfigError on out-of-range fields
};

struct AdamConfig {
  double beta1 = 0.0;
  double beta2 = 0.9;
  double epsilon = 1e-8;
};

/// Adam with bias correction; one state owns one parameter set layout.
class AdamState {
 public:
  AdamState() = default;
  AdamState(std::span<const Tensor> params, AdamConfig cfg);

  void step(std::vector<Tensor>& params, const GradientVector& grad, double learning_rate);

  std::uint64_t steps() const { return steps_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  std::vector<Tensor> first_moment_;
  std::vector<Tensor> second_moment_;
  std::uint64_t steps_ = 0;
};

/// g / max(1, |g| / clip_bound): norm capped at clip_bound, direction kept,
/// gradients already inside the ball returned unchanged. Throws NumericError
/// on non-finite input.
GradientVector clip(const GradientVector& grad, double clip_bound);

/// (sum of clipped gradients + N(0, (sigma*C)^2) per coordinate) / L, with L
/// the fixed expected lot size from cfg (never the realized count). With
/// sigma == 0 no noise is drawn and the result is the exact mean-of-sum.
/// `param_shapes` fixes the layout so an empty lot still yields pure noise.
GradientVector noisy_aggregate(const std::vector<GradientVector>& grads, std::span<const Tensor> param_shapes,
                               const DpSgdConfig& cfg, Rng& rng);

/// C <- max(decay_floor, C * clip_decay); nothing else changes.
DpSgdConfig decay_clip(const DpSgdConfig& cfg);

void sgd_step(std::vector<Tensor>& params, const GradientVector& grad, double learning_rate);

/// Poisson (per-record Bernoulli-q) lot sampling; ascending indices.
std::vector<std::size_t> sample_lot(std::size_t n_records, double q, Rng& rng);

}  // namespace dpgan
