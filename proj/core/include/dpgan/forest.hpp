#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dpgan/schema.hpp"

namespace dpgan {

struct ForestConfig {
  std::size_t n_trees = 100;
  std::size_t max_depth = 12;
  std::size_t min_samples_split = 2;
  std::size_t features_per_split = 0;  // 0: round(sqrt(feature count))
};

/// Bagged CART forest for binary labels: Gini impurity, bootstrap per tree,
/// random feature subset per split, majority vote. Per-tree rng streams are
/// derived as seed + tree index, so training is deterministic (and could be
/// parallelized across trees without changing results).
class RandomForest {
 public:
  static RandomForest train(std::span<const double> x, std::size_t width, std::span<const int> y,
                            const ForestConfig& cfg, std::uint64_t seed);

  int predict(std::span<const double> row) const;
  double accuracy(std::span<const double> x, std::span<const int> y) const;

  std::size_t feature_count() const { return width_; }

 private:
  struct TreeNode {
    int feature = -1;  // -1: leaf
    double threshold = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    int label = 0;
  };
  struct Tree {
    std::vector<TreeNode> nodes;
  };

  std::size_t width_ = 0;
  std::vector<Tree> trees_;
};

/// Feature matrix + labels for the forest: every non-label column encoded
/// (one-hot / normalized), the binary label column pulled out as ints.
struct LabeledMatrix {
  std::vector<double> x;
  std::size_t width = 0;
  std::vector<int> y;
};
LabeledMatrix to_labeled_matrix(const Table& table, const std::string& label_column);

struct UtilityReport {
  double tstr_accuracy = 0.0;      // forest trained on synthetic rows, scored on real test
  double baseline_accuracy = 0.0;  // forest trained on real rows, scored on real test
  double epsilon = 0.0;            // privacy of the generating model; +inf for non-private
};

using TableSampler = std::function<Table(std::size_t count)>;

/// Train-on-synthetic test-on-real: draws n_synthetic rows from the
/// sampler, fits a forest on them, and reports its real-test accuracy next
/// to the real-data baseline. Throws DataError when the sampler emits a
/// single-class label column.
UtilityReport tstr_utility(const TableSampler& sampler, const Table& real_train, const Table& real_test,
                           const std::string& label_column, const ForestConfig& cfg, std::size_t n_synthetic,
                           std::uint64_t seed);

}  // namespace dpgan
