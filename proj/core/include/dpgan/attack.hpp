#pragma once

#include <functional>
#include <span>
#include <vector>

#include "dpgan/schema.hpp"

namespace dpgan {

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

/// White-box membership inference outcome. Higher score means "more likely
/// a training member"; members are the positive class.
struct AttackResult {
  std::vector<double> member_scores;
  std::vector<double> non_member_scores;
  std::vector<RocPoint> roc;     // from (0,0) to (1,1), one point per distinct score
  double auc = 0.5;              // trapezoidal area under roc
  double accuracy = 0.5;         // best balanced accuracy over thresholds
  double accuracy_at_median = 0.5;  // balanced accuracy at the pooled median threshold
};

/// Builds ROC/AUC and threshold accuracies from raw scores. Tied scores
/// collapse into one ROC point, which makes the trapezoidal AUC equal the
/// average-rank U statistic.
AttackResult attack_from_scores(std::vector<double> member_scores, std::vector<double> non_member_scores);

using RowScoreFn = std::function<double(std::span<const double>)>;

/// Scores every row of both sets with the discriminator and runs
/// attack_from_scores. Both sets must share the encoding.
AttackResult membership_attack(const RowScoreFn& discriminator, const EncodedDataset& members,
                               const EncodedDataset& non_members);

}  // namespace dpgan
