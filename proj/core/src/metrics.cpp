#include "dpgan/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "dpgan/rng.hpp"

namespace dpgan {

double wasserstein1_1d(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("wasserstein1_1d: empty sample list");
  std::vector<double> sa(a.begin(), a.end());
  std::vector<double> sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());

  if (sa.size() == sb.size()) {
    double s = 0.0;
    for (std::size_t i = 0; i < sa.size(); ++i) s += std::abs(sa[i] - sb[i]);
    return s / static_cast<double>(sa.size());
  }

  // integral of |F_a^{-1}(u) - F_b^{-1}(u)| over u in (0,1)
  double n = static_cast<double>(sa.size());
  double m = static_cast<double>(sb.size());
  std::size_t ia = 0, ib = 0;
  double u = 0.0, total = 0.0;
  while (ia < sa.size() && ib < sb.size()) {
    double ua = static_cast<double>(ia + 1) / n;
    double ub = static_cast<double>(ib + 1) / m;
    double next = std::min(ua, ub);
    total += (next - u) * std::abs(sa[ia] - sb[ib]);
    u = next;
    if (ua <= next) ++ia;
    if (ub <= next) ++ib;
  }
  return total;
}

double sliced_wasserstein(std::span<const double> a, std::span<const double> b, std::size_t dim,
                          std::size_t n_projections, std::uint64_t seed) {
  if (dim == 0) throw std::invalid_argument("sliced_wasserstein: dim must be positive");
  if (a.size() % dim != 0 || b.size() % dim != 0) {
    throw std::invalid_argument("sliced_wasserstein: sample size not a multiple of dim");
  }
  std::size_t na = a.size() / dim, nb = b.size() / dim;
  if (na == 0 || nb == 0) throw std::invalid_argument("sliced_wasserstein: empty sample list");
  if (n_projections == 0) throw std::invalid_argument("sliced_wasserstein: need at least one projection");

  Rng rng(Rng::derive_seed(seed, "sliced_w1"));
  std::vector<double> dir(dim), pa(na), pb(nb);
  double total = 0.0;
  for (std::size_t p = 0; p < n_projections; ++p) {
    double norm = 0.0;
    do {
      norm = 0.0;
      for (std::size_t d = 0; d < dim; ++d) {
        dir[d] = rng.normal();
        norm += dir[d] * dir[d];
      }
      norm = std::sqrt(norm);
    } while (norm < 1e-12);
    for (std::size_t d = 0; d < dim; ++d) dir[d] /= norm;

    for (std::size_t i = 0; i < na; ++i) {
      double s = 0.0;
      for (std::size_t d = 0; d < dim; ++d) s += a[i * dim + d] * dir[d];
      pa[i] = s;
    }
    for (std::size_t i = 0; i < nb; ++i) {
      double s = 0.0;
      for (std::size_t d = 0; d < dim; ++d) s += b[i * dim + d] * dir[d];
      pb[i] = s;
    }
    total += wasserstein1_1d(pa, pb);
  }
  return total / static_cast<double>(n_projections);
}

double dtw(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("dtw: empty series");
  std::size_t n = a.size(), m = b.size();
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> prev(m + 1, kInf), cur(m + 1, kInf);
  prev[0] = 0.0;
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = kInf;
    for (std::size_t j = 1; j <= m; ++j) {
      double cost = std::abs(a[i - 1] - b[j - 1]);
      cur[j] = cost + std::min({prev[j], cur[j - 1], prev[j - 1]});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

}  // namespace dpgan
