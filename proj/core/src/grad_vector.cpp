#include "dpgan/grad_vector.hpp"

#include <cmath>

namespace dpgan {

double flattened_l2_norm(std::span<const Tensor> tensors) {
  double s = 0.0;
  for (const Tensor& t : tensors) {
    for (std::size_t i = 0; i < t.size(); ++i) s += t[i] * t[i];
  }
  return std::sqrt(s);
}

GradientVector::GradientVector(std::vector<Tensor> entries) : entries_(std::move(entries)) {
  flat_norm_ = flattened_l2_norm(entries_);
}

GradientVector GradientVector::zeros_like(std::span<const Tensor> params) {
  std::vector<Tensor> zs;
  zs.reserve(params.size());
  for (const Tensor& p : params) zs.push_back(Tensor::zeros(p.shape()));
  return GradientVector(std::move(zs));
}

bool GradientVector::all_finite() const {
  for (const Tensor& t : entries_) {
    if (!t.all_finite()) return false;
  }
  return true;
}

}  // namespace dpgan
