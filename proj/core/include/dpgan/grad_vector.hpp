#pragma once

#include <span>
#include <vector>

#include "dpgan/tensor.hpp"

namespace dpgan {

/// One tensor per model parameter, with the L2 norm of the flattened
/// concatenation cached at construction.
class GradientVector {
 public:
  GradientVector() = default;
  explicit GradientVector(std::vector<Tensor> entries);

  static GradientVector zeros_like(std::span<const Tensor> params);

  const std::vector<Tensor>& entries() const { return entries_; }
  const Tensor& entry(std::size_t i) const { return entries_[i]; }
  std::size_t size() const { return entries_.size(); }
  double flat_norm() const { return flat_norm_; }
  bool all_finite() const;

 private:
  std::vector<Tensor> entries_;
  double flat_norm_ = 0.0;
};

double flattened_l2_norm(std::span<const Tensor> tensors);

}  // namespace dpgan
