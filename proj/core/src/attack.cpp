#include "dpgan/attack.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dpgan/error.hpp"

namespace dpgan {

AttackResult attack_from_scores(std::vector<double> member_scores, std::vector<double> non_member_scores) {
  if (member_scores.empty() || non_member_scores.empty()) {
    throw std::invalid_argument("membership_attack: both score sets must be nonempty");
  }
  AttackResult res;
  res.member_scores = std::move(member_scores);
  res.non_member_scores = std::move(non_member_scores);

  // distinct thresholds, descending; each adds one ROC point after taking
  // in every sample scoring >= it
  std::vector<double> thresholds;
  thresholds.reserve(res.member_scores.size() + res.non_member_scores.size());
  thresholds.insert(thresholds.end(), res.member_scores.begin(), res.member_scores.end());
  thresholds.insert(thresholds.end(), res.non_member_scores.begin(), res.non_member_scores.end());
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  std::vector<double> sorted_members = res.member_scores;
  std::vector<double> sorted_non = res.non_member_scores;
  std::sort(sorted_members.begin(), sorted_members.end(), std::greater<>());
  std::sort(sorted_non.begin(), sorted_non.end(), std::greater<>());

  double n1 = static_cast<double>(sorted_members.size());
  double n0 = static_cast<double>(sorted_non.size());

  res.roc.clear();
  res.roc.push_back({0.0, 0.0});
  std::size_t im = 0, in = 0;
  double best_balanced = 0.5;
  for (double t : thresholds) {
    while (im < sorted_members.size() && sorted_members[im] >= t) ++im;
    while (in < sorted_non.size() && sorted_non[in] >= t) ++in;
    double tpr = static_cast<double>(im) / n1;
    double fpr = static_cast<double>(in) / n0;
    res.roc.push_back({fpr, tpr});
    best_balanced = std::max(best_balanced, 0.5 * (tpr + (1.0 - fpr)));
  }
  res.accuracy = best_balanced;

  double auc = 0.0;
  for (std::size_t i = 1; i < res.roc.size(); ++i) {
    auc += 0.5 * (res.roc[i].tpr + res.roc[i - 1].tpr) * (res.roc[i].fpr - res.roc[i - 1].fpr);
  }
  res.auc = auc;

  // pooled median threshold; predicted member iff score > median
  std::vector<double> pooled = res.member_scores;
  pooled.insert(pooled.end(), res.non_member_scores.begin(), res.non_member_scores.end());
  std::sort(pooled.begin(), pooled.end());
  double median = pooled.size() % 2 == 1 ? pooled[pooled.size() / 2]
                                         : 0.5 * (pooled[pooled.size() / 2 - 1] + pooled[pooled.size() / 2]);
  double tp = 0, tn = 0;
  for (double s : res.member_scores) tp += s > median ? 1.0 : 0.0;
  for (double s : res.non_member_scores) tn += s <= median ? 1.0 : 0.0;
  res.accuracy_at_median = 0.5 * (tp / n1 + tn / n0);
  return res;
}

AttackResult membership_attack(const RowScoreFn& discriminator, const EncodedDataset& members,
                               const EncodedDataset& non_members) {
  if (members.n_rows == 0 || non_members.n_rows == 0) {
    throw std::invalid_argument("membership_attack: both row sets must be nonempty");
  }
  if (!(members.schema == non_members.schema)) {
    throw DataError("membership_attack: member and non-member encodings differ");
  }
  std::vector<double> ms, ns;
  ms.reserve(members.n_rows);
  ns.reserve(non_members.n_rows);
  for (std::size_t r = 0; r < members.n_rows; ++r) {
    ms.push_back(discriminator({members.row(r), members.width()}));
  }
  for (std::size_t r = 0; r < non_members.n_rows; ++r) {
    ns.push_back(discriminator({non_members.row(r), non_members.width()}));
  }
  return attack_from_scores(std::move(ms), std::move(ns));
}

}  // namespace dpgan
