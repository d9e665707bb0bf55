#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace dpgan {

/// Exact 1-D Wasserstein-1 between empirical distributions: the quantile
/// coupling (mean |a_(i) - b_(i)| for equal sizes, piecewise quantile
/// integral otherwise). Throws on empty input.
double wasserstein1_1d(std::span<const double> a, std::span<const double> b);

/// Mean of wasserstein1_1d over n_projections random unit directions in
/// dim-D; rows are flat row-major. Deterministic per seed.
double sliced_wasserstein(std::span<const double> a, std::span<const double> b, std::size_t dim,
                          std::size_t n_projections, std::uint64_t seed);

/// Classic dynamic-programming DTW with absolute-difference local cost and
/// an unconstrained warping window.
double dtw(std::span<const double> a, std::span<const double> b);

}  // namespace dpgan
