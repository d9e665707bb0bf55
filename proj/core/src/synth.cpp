#include "dpgan/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace dpgan {

Table make_gaussian_mixture(std::size_t n, std::uint64_t seed) {
  if (n < 6) throw std::invalid_argument("make_gaussian_mixture: n must be >= 6");
  Schema schema({
      {"x", ContinuousKind{-1.6, 1.6}},
      {"y", ContinuousKind{-1.6, 1.6}},
      {"label", CategoricalKind{{"c0", "c1", "c2", "c3", "c4", "c5"}}},
  });
  constexpr double kStd = 0.1;
  Rng rng(Rng::derive_seed(seed, "gaussian_mixture"));
  Table table(schema);
  std::vector<double> row(3);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t comp = i % 6;
    double angle = 2.0 * std::numbers::pi * static_cast<double>(comp) / 6.0;
    row[0] = std::clamp(std::cos(angle) + kStd * rng.normal(), -1.6, 1.6);
    row[1] = std::clamp(std::sin(angle) + kStd * rng.normal(), -1.6, 1.6);
    row[2] = static_cast<double>(comp);
    table.append_row(row);
  }
  return table;
}

Table make_timeseries(std::size_t n, std::size_t length, std::uint64_t seed) {
  if (length < 2) throw std::invalid_argument("make_timeseries: length must be >= 2");
  Schema schema({{"load", SeriesKind{length}}});
  Rng rng(Rng::derive_seed(seed, "timeseries"));
  Table table(schema);
  std::vector<double> row(length);
  for (std::size_t i = 0; i < n; ++i) {
    double amp = rng.uniform(0.5, 0.9);
    double phase = 0.15 * rng.normal();
    double phase2 = 0.3 * rng.normal();
    for (std::size_t t = 0; t < length; ++t) {
      double u = static_cast<double>(t) / static_cast<double>(length);
      double base = 0.6 * std::sin(2.0 * std::numbers::pi * u + phase) +
                    0.4 * std::sin(4.0 * std::numbers::pi * u + phase2);
      row[t] = std::clamp(amp * base + 0.05 * rng.normal(), -1.0, 1.0);
    }
    table.append_row(row);
  }
  return table;
}

namespace {

std::size_t pick(Rng& rng, const std::vector<double>& weights) {
  double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (u < acc) return i;
  }
  return weights.size() - 1;
}

}  // namespace

Table make_adult_like(std::size_t n, std::uint64_t seed) {
  Schema schema({
      {"age", ContinuousKind{17.0, 90.0}},
      {"hours_per_week", ContinuousKind{1.0, 99.0}},
      {"capital_log", ContinuousKind{0.0, 10.0}},
      {"education", CategoricalKind{{"dropout", "hs_grad", "some_college", "bachelors", "advanced"}}},
      {"marital", CategoricalKind{{"never", "married", "separated"}}},
      {"occupation", CategoricalKind{{"craft", "service", "sales", "clerical", "professional", "managerial"}}},
      {"sex", CategoricalKind{{"female", "male"}}},
      {"income", CategoricalKind{{"low", "high"}}},
  });

  // label-conditional level weights; overlap tuned against the published
  // forest reference accuracy on real rows
  const std::vector<double> edu_w[2] = {{0.22, 0.34, 0.24, 0.14, 0.06}, {0.05, 0.18, 0.22, 0.33, 0.22}};
  const std::vector<double> mar_w[2] = {{0.45, 0.33, 0.22}, {0.14, 0.74, 0.12}};
  const std::vector<double> occ_w[2] = {{0.22, 0.24, 0.16, 0.18, 0.12, 0.08}, {0.10, 0.08, 0.14, 0.12, 0.27, 0.29}};
  const std::vector<double> sex_w[2] = {{0.42, 0.58}, {0.24, 0.76}};

  Rng rng(Rng::derive_seed(seed, "adult_like"));
  Table table(schema);
  std::vector<double> row(schema.raw_width());
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t y = i % 2;  // balanced label
    double age = (y == 1) ? 44.0 + 10.5 * rng.normal() : 37.0 + 12.5 * rng.normal();
    double hours = (y == 1) ? 45.0 + 9.0 * rng.normal() : 39.5 + 11.0 * rng.normal();
    double capital = (y == 1) ? 3.2 + 2.6 * rng.normal() : 1.6 + 2.0 * rng.normal();
    row[0] = std::clamp(age, 17.0, 90.0);
    row[1] = std::clamp(hours, 1.0, 99.0);
    row[2] = std::clamp(capital, 0.0, 10.0);
    row[3] = static_cast<double>(pick(rng, edu_w[y]));
    row[4] = static_cast<double>(pick(rng, mar_w[y]));
    row[5] = static_cast<double>(pick(rng, occ_w[y]));
    row[6] = static_cast<double>(pick(rng, sex_w[y]));
    row[7] = static_cast<double>(y);
    table.append_row(row);
  }
  return table;
}

}  // namespace dpgan
