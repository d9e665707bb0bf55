#include "dpgan/accountant.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "dpgan/error.hpp"

namespace dpgan {

void MechanismParams::validate() const {
  if (!(q >= 0.0 && q <= 1.0)) throw ConfigError("accountant: q must be in [0,1]");
  if (!(sigma > 0.0)) throw ConfigError("accountant: sigma must be > 0");
}

namespace {

constexpr double kTailBudget = 1e-12;  // max allowed relative truncation per integral

double log_sum_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

double log_sum_exp(const std::vector<double>& xs) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : xs) m = std::max(m, x);
  if (m == -std::numeric_limits<double>::infinity()) return m;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

/// log of the standard normal upper tail P(Z > t), t >= 0. Exact erfc for
/// moderate t, asymptotic expansion where erfc underflows.
double log_normal_tail(double t) {
  if (t < 30.0) return std::log(0.5 * std::erfc(t / std::numbers::sqrt2));
  return -0.5 * t * t - std::log(t) - 0.5 * std::log(2.0 * std::numbers::pi);
}

struct Densities {
  double q;
  double sigma;
  double log_norm;  // -log(sigma * sqrt(2*pi))
  double log_q;
  double log_1mq;

  explicit Densities(const MechanismParams& p)
      : q(p.q),
        sigma(p.sigma),
        log_norm(-std::log(p.sigma) - 0.5 * std::log(2.0 * std::numbers::pi)),
        log_q(p.q > 0 ? std::log(p.q) : -std::numeric_limits<double>::infinity()),
        log_1mq(p.q < 1 ? std::log1p(-p.q) : -std::numeric_limits<double>::infinity()) {}

  double log_mu0(double z) const { return log_norm - z * z / (2.0 * sigma * sigma); }
  double log_mu1(double z) const { return log_norm - (z - 1.0) * (z - 1.0) / (2.0 * sigma * sigma); }
  double log_mu(double z) const { return log_sum_exp(log_1mq + log_mu0(z), log_q + log_mu1(z)); }
};

/// Composite Simpson in log space: returns log of integral of exp(log_f)
/// over [lo, hi] with n panels (n even).
template <typename LogF>
double log_simpson(LogF&& log_f, double lo, double hi, std::size_t n) {
  double h = (hi - lo) / static_cast<double>(n);
  std::vector<double> terms;
  terms.reserve(n + 1);
  for (std::size_t i = 0; i <= n; ++i) {
    double z = lo + h * static_cast<double>(i);
    double w = (i == 0 || i == n) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    terms.push_back(std::log(w) + log_f(z));
  }
  return log_sum_exp(terms) + std::log(h / 3.0);
}

/// Adaptive refinement until two successive doublings agree to 1e-11 in log
/// value; throws if the panel cap is reached first.
template <typename LogF>
double log_integrate(LogF&& log_f, double lo, double hi, std::size_t n0, const char* what) {
  constexpr std::size_t kMaxPanels = 1u << 22;
  std::size_t n = n0;
  double prev = log_simpson(log_f, lo, hi, n);
  while (n < kMaxPanels) {
    n *= 2;
    double cur = log_simpson(log_f, lo, hi, n);
    if (std::abs(cur - prev) < 1e-11 * std::max(1.0, std::abs(cur))) return cur;
    prev = cur;
  }
  throw NumericError(std::string("accountant: quadrature for ") + what + " did not converge");
}

std::size_t initial_panels(double lo, double hi, double sigma) {
  double per_sigma = 16.0;
  double n = (hi - lo) / sigma * per_sigma;
  std::size_t p = 1024;
  while (p < n && p < (1u << 20)) p *= 2;
  return p;
}

/// Solves Phi_c(t) <= exp(log_target) conservatively via
/// Phi_c(t) <= exp(-t^2/2).
double tail_quantile(double log_target) {
  return std::sqrt(std::max(0.0, -2.0 * log_target)) + 1.0;
}

}  // namespace

double per_step_log_moment(const MechanismParams& params, int lambda) {
  params.validate();
  if (lambda < 1) throw std::invalid_argument("per_step_log_moment: lambda must be >= 1");
  if (params.q == 0.0) return 0.0;  // mu == mu0, both expectations are 1
  if (params.q == 1.0) {
    // plain Gaussian mechanism: E1 = E2 = exp(lambda (lambda+1) / (2 sigma^2))
    double lam = static_cast<double>(lambda);
    return lam * (lam + 1.0) / (2.0 * params.sigma * params.sigma);
  }

  const Densities d(params);
  const double sigma = params.sigma;
  const double lam = static_cast<double>(lambda);
  const double log_tail_budget = std::log(kTailBudget) - std::log(4.0);  // split across two sides, with margin

  // E1 = int mu0 * (mu0/mu)^lambda. Envelope: integrand <= mu0 * (1-q)^-lambda.
  double log_env1 = -lam * d.log_1mq;
  double t1 = tail_quantile(log_tail_budget - log_env1);
  double lo1 = -sigma * t1;
  double hi1 = 1.0 + sigma * t1;
  auto log_f1 = [&](double z) {
    double l0 = d.log_mu0(z);
    return l0 + lam * (l0 - d.log_mu(z));
  };
  double log_e1 = log_integrate(log_f1, lo1, hi1, initial_panels(lo1, hi1, sigma), "E1");
  // certify the truncation against the envelope; E1 >= 1 so absolute budget works
  double log_tail1 = log_env1 + std::log(2.0) + log_normal_tail(t1);
  if (log_tail1 > std::log(kTailBudget) + std::max(0.0, log_e1)) {
    throw NumericError("accountant: E1 tail bound not met at configured range");
  }

  // E2 = int mu * (mu/mu0)^lambda. Envelope via (a+b)^p <= 2^(p-1)(a^p+b^p):
  //   integrand <= 2^lam (1-q)^(lam+1) mu0 + 2^lam q^(lam+1) e^(lam(lam+1)/(2 sigma^2)) N(lam+1, sigma^2)
  double log_a = lam * std::log(2.0) + (lam + 1.0) * d.log_1mq;
  double log_b = lam * std::log(2.0) + (lam + 1.0) * d.log_q + lam * (lam + 1.0) / (2.0 * sigma * sigma);
  double log_env2 = log_sum_exp(log_a, log_b);
  double t2 = tail_quantile(log_tail_budget - log_env2);
  double lo2 = -sigma * t2;
  double hi2 = lam + 1.0 + sigma * t2;
  auto log_f2 = [&](double z) {
    double lm = d.log_mu(z);
    return lm + lam * (lm - d.log_mu0(z));
  };
  double log_e2 = log_integrate(log_f2, lo2, hi2, initial_panels(lo2, hi2, sigma), "E2");
  double log_tail2 = log_env2 + std::log(2.0) + log_normal_tail(t2);
  if (log_tail2 > std::log(kTailBudget) + std::max(0.0, log_e2)) {
    throw NumericError("accountant: E2 tail bound not met at configured range");
  }

  double alpha = std::max(log_e1, log_e2);
  // numerical floor: both expectations are >= 1 by Jensen, so alpha >= 0
  return std::max(0.0, alpha);
}

MomentAccountant::MomentAccountant(MechanismParams params, int lambda_max) : params_(params) {
  params_.validate();
  if (lambda_max < 1) throw ConfigError("accountant: lambda_max must be >= 1");
  per_step_.resize(static_cast<std::size_t>(lambda_max));
  for (int lambda = 1; lambda <= lambda_max; ++lambda) {
    per_step_[static_cast<std::size_t>(lambda - 1)] = per_step_log_moment(params_, lambda);
  }
}

double MomentAccountant::per_step(int lambda) const {
  if (lambda < 1 || lambda > lambda_max()) throw std::invalid_argument("accountant: lambda outside grid");
  return per_step_[static_cast<std::size_t>(lambda - 1)];
}

double MomentAccountant::log_moment(int lambda) const {
  return static_cast<double>(steps_) * per_step(lambda);
}

double MomentAccountant::epsilon_for_delta(double delta, int* argmin_lambda) const {
  return epsilon_for_delta_at(steps_, delta, argmin_lambda);
}

double MomentAccountant::epsilon_for_delta_at(std::uint64_t steps, double delta, int* argmin_lambda) const {
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("accountant: delta must be in (0,1)");
  if (argmin_lambda) *argmin_lambda = 0;
  if (steps == 0) return 0.0;  // empty composition convention
  double log_inv_delta = -std::log(delta);
  double best = std::numeric_limits<double>::infinity();
  int best_lambda = 0;
  for (int lambda = 1; lambda <= lambda_max(); ++lambda) {
    double alpha_total = static_cast<double>(steps) * per_step(lambda);
    double eps = (alpha_total + log_inv_delta) / static_cast<double>(lambda);
    if (eps < best) {  // strict: ties keep the smaller lambda
      best = eps;
      best_lambda = lambda;
    }
  }
  if (argmin_lambda) *argmin_lambda = best_lambda;
  return best;
}

double MomentAccountant::delta_for_epsilon(double epsilon) const {
  if (!(epsilon >= 0.0)) throw ConfigError("accountant: epsilon must be >= 0");
  double best_log = std::numeric_limits<double>::infinity();
  for (int lambda = 1; lambda <= lambda_max(); ++lambda) {
    double log_delta = log_moment(lambda) - static_cast<double>(lambda) * epsilon;
    best_log = std::min(best_log, log_delta);
  }
  double delta = std::exp(std::min(best_log, 0.0));
  return std::max(delta, std::numeric_limits<double>::min());
}

}  // namespace dpgan
