#include "dpgan/dp_optim.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "dpgan/error.hpp"

namespace dpgan {

void DpSgdConfig::validate() const {
  if (!(clip_bound > 0.0)) throw ConfigError("dp: clip_bound must be > 0");
  if (!(noise_scale >= 0.0)) throw ConfigError("dp: noise_scale must be >= 0");
  if (!(lot_size > 0.0)) throw ConfigError("dp: lot_size must be > 0");
  if (!(learning_rate > 0.0)) throw ConfigError("dp: learning_rate must be > 0");
  if (!(clip_decay > 0.0 && clip_decay <= 1.0)) throw ConfigError("dp: clip_decay must be in (0,1]");
  if (!(decay_floor > 0.0)) throw ConfigError("dp: decay_floor must be > 0");
}

AdamState::AdamState(std::span<const Tensor> params, AdamConfig cfg) : cfg_(cfg) {
  first_moment_.reserve(params.size());
  second_moment_.reserve(params.size());
  for (const Tensor& p : params) {
    first_moment_.push_back(Tensor::zeros(p.shape()));
    second_moment_.push_back(Tensor::zeros(p.shape()));
  }
}

void AdamState::step(std::vector<Tensor>& params, const GradientVector& grad, double learning_rate) {
  if (params.size() != first_moment_.size() || grad.size() != params.size()) {
    throw std::invalid_argument("adam_step: parameter/gradient layout mismatch");
  }
  ++steps_;
  double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(steps_));
  double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(steps_));
  for (std::size_t t = 0; t < params.size(); ++t) {
    Tensor& p = params[t];
    const Tensor& g = grad.entry(t);
    if (!p.same_shape(g)) throw std::invalid_argument("adam_step: shape mismatch at parameter " + std::to_string(t));
    Tensor& m = first_moment_[t];
    Tensor& v = second_moment_[t];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
      double m_hat = m[i] / bc1;
      double v_hat = v[i] / bc2;
      p[i] -= learning_rate * m_hat / (std::sqrt(v_hat) + cfg_.epsilon);
    }
  }
}

GradientVector clip(const GradientVector& grad, double clip_bound) {
  if (!(clip_bound > 0.0)) throw std::invalid_argument("clip: clip_bound must be > 0");
  if (!grad.all_finite()) throw NumericError("clip: non-finite gradient");
  double factor = std::max(1.0, grad.flat_norm() / clip_bound);
  if (factor == 1.0) return grad;
  std::vector<Tensor> scaled = grad.entries();
  double inv = 1.0 / factor;
  for (Tensor& t : scaled) {
    for (std::size_t i = 0; i < t.size(); ++i) t[i] *= inv;
  }
  return GradientVector(std::move(scaled));
}

GradientVector noisy_aggregate(const std::vector<GradientVector>& grads, std::span<const Tensor> param_shapes,
                               const DpSgdConfig& cfg, Rng& rng) {
  cfg.validate();
  std::vector<Tensor> acc;
  acc.reserve(param_shapes.size());
  for (const Tensor& p : param_shapes) acc.push_back(Tensor::zeros(p.shape()));

  double norm_slack = cfg.clip_bound * (1.0 + 1e-9);
  for (const GradientVector& g : grads) {
    if (g.size() != acc.size()) throw std::invalid_argument("noisy_aggregate: gradient entry count mismatch");
    if (g.flat_norm() > norm_slack) {
      throw std::invalid_argument("noisy_aggregate: input gradient norm exceeds the clip bound; clip first");
    }
    for (std::size_t t = 0; t < acc.size(); ++t) {
      if (!acc[t].same_shape(g.entry(t))) {
        throw std::invalid_argument("noisy_aggregate: shape mismatch at parameter " + std::to_string(t));
      }
      const Tensor& e = g.entry(t);
      for (std::size_t i = 0; i < e.size(); ++i) acc[t][i] += e[i];
    }
  }

  double noise_std = cfg.noise_scale * cfg.clip_bound;
  double inv_l = 1.0 / cfg.lot_size;
  for (Tensor& t : acc) {
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (noise_std > 0.0) t[i] += rng.normal(0.0, noise_std);
      t[i] *= inv_l;
    }
  }
  return GradientVector(std::move(acc));
}

DpSgdConfig decay_clip(const DpSgdConfig& cfg) {
  DpSgdConfig out = cfg;
  out.clip_bound = std::max(cfg.decay_floor, cfg.clip_bound * cfg.clip_decay);
  return out;
}

void sgd_step(std::vector<Tensor>& params, const GradientVector& grad, double learning_rate) {
  if (params.size() != grad.size()) throw std::invalid_argument("sgd_step: parameter/gradient layout mismatch");
  for (std::size_t t = 0; t < params.size(); ++t) {
    Tensor& p = params[t];
    const Tensor& g = grad.entry(t);
    if (!p.same_shape(g)) throw std::invalid_argument("sgd_step: shape mismatch at parameter " + std::to_string(t));
    for (std::size_t i = 0; i < p.size(); ++i) p[i] -= learning_rate * g[i];
  }
}

std::vector<std::size_t> sample_lot(std::size_t n_records, double q, Rng& rng) {
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("sample_lot: q must be in [0,1]");
  std::vector<std::size_t> lot;
  if (q == 0.0) return lot;
  for (std::size_t i = 0; i < n_records; ++i) {
    if (q >= 1.0 || rng.uniform() < q) lot.push_back(i);
  }
  return lot;
}

}  // namespace dpgan
