#pragma once

#include <cstdint>
#include <vector>

namespace dpgan {

/// Subsampled Gaussian mechanism: Bernoulli-q record inclusion followed by
/// a Gaussian release with noise std sigma (in units of the clip bound).
/// The clipping bound is deliberately absent: it cannot affect the privacy
/// cost through this interface.
struct MechanismParams {
  double q = 0.0;      // sampling probability, in [0,1]
  double sigma = 1.0;  // noise scale, > 0

  void validate() const;  // throws ConfigError
};

struct PrivacySpent {
  double epsilon = 0.0;
  double delta = 0.0;
};

/// Log moment alpha(lambda) of one mechanism invocation,
/// alpha = log(max(E1, E2)) with
///   E1 = E_{z~mu0}[(mu0(z)/mu(z))^lambda],
///   E2 = E_{z~mu }[(mu(z)/mu0(z))^lambda],
/// mu0 = N(0, sigma^2), mu1 = N(1, sigma^2), mu = (1-q) mu0 + q mu1.
/// Evaluated by adaptive composite Simpson quadrature in log space over a
/// range wide enough that the truncated tails contribute < 1e-12 of each
/// integral; throws NumericError if that bound cannot be certified.
double per_step_log_moment(const MechanismParams& params, int lambda);

/// Accumulates log moments over identical mechanism invocations on an
/// integer lambda grid and converts them to (epsilon, delta) via the tail
/// bound delta = min_lambda exp(alpha_total(lambda) - lambda * epsilon).
class MomentAccountant {
 public:
  explicit MomentAccountant(MechanismParams params, int lambda_max = 64);

  void record_steps(std::uint64_t count) { steps_ += count; }
  std::uint64_t steps() const { return steps_; }
  const MechanismParams& params() const { return params_; }
  int lambda_max() const { return static_cast<int>(per_step_.size()); }

  /// Accumulated alpha_total(lambda) = steps * alpha_step(lambda).
  double log_moment(int lambda) const;
  double per_step(int lambda) const;

  /// min over the lambda grid of (alpha_total + ln(1/delta)) / lambda; ties
  /// go to the smaller lambda; zero recorded steps yield epsilon = 0 by
  /// convention. Optionally reports the minimizing lambda.
  double epsilon_for_delta(double delta, int* argmin_lambda = nullptr) const;

  /// Same query at a hypothetical step count (spent budget look-ahead).
  double epsilon_for_delta_at(std::uint64_t steps, double delta, int* argmin_lambda = nullptr) const;

  /// min over the lambda grid of exp(alpha_total - lambda * epsilon),
  /// clamped into (0, 1].
  double delta_for_epsilon(double epsilon) const;

 private:
  MechanismParams params_;
  std::vector<double> per_step_;  // alpha(lambda), lambda = 1..lambda_max
  std::uint64_t steps_ = 0;
};

}  // namespace dpgan
