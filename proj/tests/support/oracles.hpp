#pragma once

// Test-side oracles, independent of the library implementation paths they
// check: Monte-Carlo log moments vs the quadrature accountant, exact
// min-cost-flow transport vs the sorted-coupling W1, exhaustive alignment
// enumeration vs the DTW recurrence, the rank-statistic AUC identity, and a
// batched reference WGAN update path vs the per-example training loop.

#include <cstdint>
#include <span>
#include <vector>

#include "dpgan/gan.hpp"
#include "dpgan/schema.hpp"
#include "dpgan/tensor.hpp"

namespace dpgan::oracle {

struct McMoment {
  double log_e1 = 0.0;
  double se1_rel = 0.0;  // relative standard error of E1 (== abs SE of log E1)
  double log_e2 = 0.0;
  double se2_rel = 0.0;
  double alpha() const { return std::max(log_e1, log_e2); }
};

/// Monte-Carlo estimate of E1 = E_{mu0}[(mu0/mu)^lambda] (direct sampling)
/// and E2 = E_{mu}[(mu/mu0)^lambda] (importance sampling from
/// 0.5*mu + 0.5*N(lambda+1, sigma^2), which covers the saddle region that
/// dominates E2 for large lambda).
McMoment mc_log_moment(double q, double sigma, int lambda, std::size_t draws, std::uint64_t seed);

/// Exact empirical W1 via integer-capacity min-cost flow on the bipartite
/// sample graph (masses scaled by lcm(n,m)); intended for n, m <= ~8.
double transport_w1_exact(const std::vector<double>& a, const std::vector<double>& b);

/// Minimum total |a_i - b_j| cost over all monotone alignments, enumerated
/// recursively; intended for lengths <= ~7.
double dtw_bruteforce(std::span<const double> a, std::span<const double> b);

/// P(random member score > random non-member score) + 0.5 P(tie), by direct
/// enumeration over all pairs.
double auc_rank(std::span<const double> member_scores, std::span<const double> non_member_scores);

/// Non-private WGAN-GP training reference: the same loop schedule and rng
/// streams as dpgan::train, but every discriminator update is computed from
/// one batched graph over the realized lot (gradient of the batch mean,
/// rescaled by |lot|/L) instead of per-example backward passes.
struct RefWganResult {
  std::vector<Tensor> theta_g;
  std::vector<Tensor> theta_d;
};
RefWganResult reference_wgan_run(const EncodedDataset& dataset, const GanArchitecture& arch,
                                 const TrainLoopConfig& cfg, std::uint64_t seed, std::size_t iterations);

}  // namespace dpgan::oracle
