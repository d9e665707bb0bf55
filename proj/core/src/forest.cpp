#include "dpgan/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "dpgan/error.hpp"
#include "dpgan/rng.hpp"

namespace dpgan {

namespace {

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  double gini = std::numeric_limits<double>::infinity();
};

double gini_pair(double pos, double total) {
  if (total <= 0.0) return 0.0;
  double p = pos / total;
  return 2.0 * p * (1.0 - p);
}

}  // namespace

RandomForest RandomForest::train(std::span<const double> x, std::size_t width, std::span<const int> y,
                                 const ForestConfig& cfg, std::uint64_t seed) {
  if (width == 0 || y.empty() || x.size() != y.size() * width) {
    throw std::invalid_argument("forest: inconsistent matrix dimensions");
  }
  std::size_t n = y.size();
  bool saw[2] = {false, false};
  for (int label : y) {
    if (label != 0 && label != 1) throw std::invalid_argument("forest: labels must be 0/1");
    saw[label] = true;
  }
  if (!saw[0] || !saw[1]) throw DataError("forest: training set contains a single class");

  RandomForest forest;
  forest.width_ = width;
  forest.trees_.resize(cfg.n_trees);
  std::size_t k_features = cfg.features_per_split > 0
                               ? std::min(cfg.features_per_split, width)
                               : std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(width)))));

  for (std::size_t t = 0; t < cfg.n_trees; ++t) {
    Rng rng(seed + t);
    std::vector<std::size_t> sample(n);
    for (std::size_t i = 0; i < n; ++i) sample[i] = rng.index(n);  // bootstrap

    Tree& tree = forest.trees_[t];
    std::vector<std::size_t> feature_pool(width);
    std::iota(feature_pool.begin(), feature_pool.end(), 0);
    std::vector<double> col(n);

    // iterative node expansion; each frame owns its index range
    struct Frame {
      std::vector<std::size_t> idx;
      std::int32_t node;
      std::size_t depth;
    };
    tree.nodes.push_back({});
    std::vector<Frame> stack;
    stack.push_back({std::move(sample), 0, 0});

    while (!stack.empty()) {
      Frame frame = std::move(stack.back());
      stack.pop_back();
      auto& idx = frame.idx;
      double pos = 0.0;
      for (std::size_t i : idx) pos += y[i];
      double total = static_cast<double>(idx.size());
      int majority = pos * 2.0 >= total ? 1 : 0;

      TreeNode& node = tree.nodes[frame.node];
      node.label = majority;
      if (frame.depth >= cfg.max_depth || idx.size() < cfg.min_samples_split || pos == 0.0 || pos == total) {
        continue;  // leaf
      }

      // random feature subset, Fisher-Yates prefix
      for (std::size_t i = 0; i < k_features; ++i) {
        std::size_t j = i + rng.index(width - i);
        std::swap(feature_pool[i], feature_pool[j]);
      }

      SplitChoice best;
      for (std::size_t fi = 0; fi < k_features; ++fi) {
        std::size_t f = feature_pool[fi];
        std::vector<std::size_t> order = idx;
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
          double va = x[a * width + f], vb = x[b * width + f];
          return va < vb || (va == vb && a < b);
        });
        double left_pos = 0.0;
        for (std::size_t i = 0; i + 1 < order.size(); ++i) {
          left_pos += y[order[i]];
          double va = x[order[i] * width + f];
          double vb = x[order[i + 1] * width + f];
          if (va == vb) continue;
          double left_n = static_cast<double>(i + 1);
          double right_n = total - left_n;
          double g = left_n / total * gini_pair(left_pos, left_n) + right_n / total * gini_pair(pos - left_pos, right_n);
          if (g < best.gini) {
            best = {static_cast<int>(f), 0.5 * (va + vb), g};
          }
        }
      }
      if (best.feature < 0) continue;  // no informative split among the sampled features

      std::vector<std::size_t> left_idx, right_idx;
      for (std::size_t i : idx) {
        (x[i * width + static_cast<std::size_t>(best.feature)] <= best.threshold ? left_idx : right_idx).push_back(i);
      }
      if (left_idx.empty() || right_idx.empty()) continue;

      std::int32_t left_id = static_cast<std::int32_t>(tree.nodes.size());
      tree.nodes.push_back({});
      std::int32_t right_id = static_cast<std::int32_t>(tree.nodes.size());
      tree.nodes.push_back({});
      TreeNode& nd = tree.nodes[frame.node];  // re-resolve: vector may have grown
      nd.feature = best.feature;
      nd.threshold = best.threshold;
      nd.left = left_id;
      nd.right = right_id;
      stack.push_back({std::move(right_idx), right_id, frame.depth + 1});
      stack.push_back({std::move(left_idx), left_id, frame.depth + 1});
    }
  }
  return forest;
}

int RandomForest::predict(std::span<const double> row) const {
  if (row.size() != width_) throw std::invalid_argument("forest: row width mismatch");
  int votes = 0;
  for (const Tree& tree : trees_) {
    std::int32_t cur = 0;
    while (tree.nodes[cur].feature >= 0) {
      const TreeNode& nd = tree.nodes[cur];
      cur = row[static_cast<std::size_t>(nd.feature)] <= nd.threshold ? nd.left : nd.right;
    }
    votes += tree.nodes[cur].label;
  }
  return votes * 2 > static_cast<int>(trees_.size()) ? 1 : 0;
}

double RandomForest::accuracy(std::span<const double> x, std::span<const int> y) const {
  if (y.empty() || x.size() != y.size() * width_) throw std::invalid_argument("forest: inconsistent matrix dimensions");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (predict(x.subspan(i * width_, width_)) == y[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(y.size());
}

LabeledMatrix to_labeled_matrix(const Table& table, const std::string& label_column) {
  const Schema& schema = table.schema();
  std::size_t label_col = schema.find(label_column);
  const Column& lc = schema.column(label_col);
  if (!lc.is_categorical() || lc.categorical().levels.size() != 2) {
    throw DataError("to_labeled_matrix: label column '" + label_column + "' must be binary categorical");
  }
  EncodedDataset enc = encode(table);
  std::size_t label_off = schema.encoded_offset(label_col);
  std::size_t label_w = 2;
  LabeledMatrix out;
  out.width = schema.encoded_width() - label_w;
  out.x.reserve(enc.n_rows * out.width);
  out.y.reserve(enc.n_rows);
  std::size_t raw_label = schema.raw_offset(label_col);
  for (std::size_t r = 0; r < enc.n_rows; ++r) {
    const double* row = enc.row(r);
    out.x.insert(out.x.end(), row, row + label_off);
    out.x.insert(out.x.end(), row + label_off + label_w, row + enc.width());
    out.y.push_back(static_cast<int>(table.cell(r, raw_label)));
  }
  return out;
}

UtilityReport tstr_utility(const TableSampler& sampler, const Table& real_train, const Table& real_test,
                           const std::string& label_column, const ForestConfig& cfg, std::size_t n_synthetic,
                           std::uint64_t seed) {
  Table synthetic = sampler(n_synthetic);
  if (!(synthetic.schema() == real_test.schema())) {
    throw DataError("tstr_utility: sampler schema does not match the real data schema");
  }
  LabeledMatrix synth = to_labeled_matrix(synthetic, label_column);
  bool saw[2] = {false, false};
  for (int label : synth.y) saw[label] = true;
  if (!saw[0] || !saw[1]) {
    throw DataError("tstr_utility: generator emitted a single-class label column (degenerate output)");
  }
  LabeledMatrix train = to_labeled_matrix(real_train, label_column);
  LabeledMatrix test = to_labeled_matrix(real_test, label_column);

  RandomForest synth_forest = RandomForest::train(synth.x, synth.width, synth.y, cfg, Rng::derive_seed(seed, "tstr_forest"));
  RandomForest real_forest = RandomForest::train(train.x, train.width, train.y, cfg, Rng::derive_seed(seed, "baseline_forest"));

  UtilityReport rep;
  rep.tstr_accuracy = synth_forest.accuracy(test.x, test.y);
  rep.baseline_accuracy = real_forest.accuracy(test.x, test.y);
  return rep;
}

}  // namespace dpgan
