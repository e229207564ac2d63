#pragma once

#include <vector>

#include "confit/numeric.hpp"

namespace confit {

enum class Mining { kNone, kHard };

struct SupConConfig {
  double temperature = 0.1;
  Mining mining = Mining::kHard;
  int hard_positives = 1;  // per-anchor positives kept when mining
  int hard_negatives = 1;
  void validate() const;
};

struct MiningResult {
  // Per anchor, candidate indices into the batch. Positives are the lowest
  // cosine similarity to the anchor, negatives the highest; ties break to the
  // lower index.
  std::vector<std::vector<int>> hardest_positives;
  std::vector<std::vector<int>> hardest_negatives;
};

struct LossResult {
  double loss = 0.0;
  Matrix grad;  // N x p, gradient w.r.t. the embedding entries
};

// Supervised contrastive loss over unit-norm rows. Anchors without a positive
// are skipped; the loss is the mean over contributing anchors.
LossResult supcon_loss(const Eigen::Ref<const Matrix>& embeddings,
                       const std::vector<int>& labels, const SupConConfig& config);

MiningResult mine_hard_pairs(const Eigen::Ref<const Matrix>& embeddings,
                             const std::vector<int>& labels, const SupConConfig& config);

// Same objective restricted per anchor to the mined positives and negatives.
// The selection is treated as fixed when differentiating.
LossResult mined_supcon_loss(const Eigen::Ref<const Matrix>& embeddings,
                             const std::vector<int>& labels, const SupConConfig& config);

// Dispatches on config.mining.
LossResult batch_loss(const Eigen::Ref<const Matrix>& embeddings,
                      const std::vector<int>& labels, const SupConConfig& config);

}  // namespace confit
