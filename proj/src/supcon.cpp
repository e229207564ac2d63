#include "confit/supcon.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace confit {

namespace {

void check_embeddings(const Eigen::Ref<const Matrix>& z, const std::vector<int>& labels) {
  if (z.rows() < 2) throw DimensionMismatchError("supcon: need at least 2 embeddings");
  if (static_cast<Eigen::Index>(labels.size()) != z.rows())
    throw DimensionMismatchError("supcon: " + std::to_string(labels.size()) + " labels for " +
                                 std::to_string(z.rows()) + " embeddings");
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double norm = z.row(i).norm();
    if (std::abs(norm - 1.0) > 1e-6)
      throw NotNormalizedError("supcon: row " + std::to_string(i) + " has norm " +
                               std::to_string(norm));
  }
}

// Shared core: per anchor i the denominator runs over anchor_sets[i] and the
// positives over positive_sets[i] (a subset). Anchors with no positives are
// skipped; the loss is averaged over the rest.
LossResult restricted_loss(const Eigen::Ref<const Matrix>& z, double tau,
                           const std::vector<std::vector<int>>& anchor_sets,
                           const std::vector<std::vector<int>>& positive_sets) {
  const Eigen::Index n = z.rows();
  const Matrix sims = z * z.transpose() / tau;
  Matrix coeff = Matrix::Zero(n, n);
  double total = 0.0;
  int contributing = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& anchor_set = anchor_sets[static_cast<std::size_t>(i)];
    const auto& positives = positive_sets[static_cast<std::size_t>(i)];
    if (positives.empty()) continue;
    ++contributing;

    double top = -std::numeric_limits<double>::infinity();
    std::size_t top_at = 0;
    for (std::size_t k = 0; k < anchor_set.size(); ++k) {
      const double s = sims(i, anchor_set[k]);
      if (s > top) {
        top = s;
        top_at = k;
      }
    }
    // log-sum-exp with log1p around the max so tiny tails stay nonzero
    double rest = 0.0;
    for (std::size_t k = 0; k < anchor_set.size(); ++k)
      if (k != top_at) rest += std::exp(sims(i, anchor_set[k]) - top);
    const double lse = top + std::log1p(rest);
    const double denom = 1.0 + rest;

    double mean_pos = 0.0;
    for (int p : positives) mean_pos += sims(i, p);
    mean_pos /= static_cast<double>(positives.size());
    total += lse - mean_pos;

    for (int a : anchor_set) coeff(i, a) += std::exp(sims(i, a) - top) / denom;
    for (int p : positives) coeff(i, p) -= 1.0 / static_cast<double>(positives.size());
  }
  if (contributing == 0) throw NoPositivePairsError("supcon: no anchor has a positive");

  LossResult out;
  out.loss = total / contributing;
  out.grad = (coeff + coeff.transpose()) * z / (tau * contributing);
  return out;
}

}  // namespace

void SupConConfig::validate() const {
  if (!(temperature > 0.0) || !std::isfinite(temperature))
    throw InvalidSpecError("SupConConfig: temperature must be positive");
  if (hard_positives < 1) throw InvalidSpecError("SupConConfig: hard_positives must be >= 1");
  if (hard_negatives < 1) throw InvalidSpecError("SupConConfig: hard_negatives must be >= 1");
}

LossResult supcon_loss(const Eigen::Ref<const Matrix>& embeddings,
                       const std::vector<int>& labels, const SupConConfig& config) {
  config.validate();
  check_embeddings(embeddings, labels);
  const auto n = static_cast<std::size_t>(embeddings.rows());
  std::vector<std::vector<int>> anchor_sets(n);
  std::vector<std::vector<int>> positive_sets(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      anchor_sets[i].push_back(static_cast<int>(j));
      if (labels[j] == labels[i]) positive_sets[i].push_back(static_cast<int>(j));
    }
  }
  return restricted_loss(embeddings, config.temperature, anchor_sets, positive_sets);
}

MiningResult mine_hard_pairs(const Eigen::Ref<const Matrix>& embeddings,
                             const std::vector<int>& labels, const SupConConfig& config) {
  config.validate();
  check_embeddings(embeddings, labels);
  const Eigen::Index n = embeddings.rows();
  Vector sq(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    sq(i) = embeddings.row(i).dot(embeddings.row(i));
    if (std::sqrt(sq(i)) < kZeroNormTol)
      throw ZeroNormError("mine_hard_pairs: row " + std::to_string(i) + " has zero norm");
  }
  MiningResult result;
  result.hardest_positives.resize(static_cast<std::size_t>(n));
  result.hardest_negatives.resize(static_cast<std::size_t>(n));
  int anchors_with_positives = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    std::vector<std::pair<double, int>> pos;
    std::vector<std::pair<double, int>> neg;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      const double c = embeddings.row(i).dot(embeddings.row(j)) / std::sqrt(sq(i) * sq(j));
      if (labels[static_cast<std::size_t>(j)] == labels[static_cast<std::size_t>(i)])
        pos.emplace_back(c, static_cast<int>(j));
      else
        neg.emplace_back(c, static_cast<int>(j));
    }
    // Anchors without a positive are skipped downstream (same convention as the
    // loss), so they are left with empty sets rather than treated as errors. An
    // anchor that will contribute must have a hard negative to mine.
    if (pos.empty()) continue;
    ++anchors_with_positives;
    if (neg.empty())
      throw NoNegativeError("mine_hard_pairs: anchor " + std::to_string(i) +
                            " has no different-label co-member");
    std::sort(pos.begin(), pos.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first < b.first : a.second < b.second;
    });
    std::sort(neg.begin(), neg.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    const auto take_pos = std::min<std::size_t>(pos.size(),
                                                static_cast<std::size_t>(config.hard_positives));
    const auto take_neg = std::min<std::size_t>(neg.size(),
                                                static_cast<std::size_t>(config.hard_negatives));
    for (std::size_t k = 0; k < take_pos; ++k)
      result.hardest_positives[static_cast<std::size_t>(i)].push_back(pos[k].second);
    for (std::size_t k = 0; k < take_neg; ++k)
      result.hardest_negatives[static_cast<std::size_t>(i)].push_back(neg[k].second);
  }
  if (anchors_with_positives == 0)
    throw NoPositiveError("mine_hard_pairs: no anchor has a same-label co-member");
  return result;
}

LossResult mined_supcon_loss(const Eigen::Ref<const Matrix>& embeddings,
                             const std::vector<int>& labels, const SupConConfig& config) {
  const MiningResult mined = mine_hard_pairs(embeddings, labels, config);
  const auto n = static_cast<std::size_t>(embeddings.rows());
  std::vector<std::vector<int>> anchor_sets(n);
  for (std::size_t i = 0; i < n; ++i) {
    anchor_sets[i] = mined.hardest_positives[i];
    anchor_sets[i].insert(anchor_sets[i].end(), mined.hardest_negatives[i].begin(),
                          mined.hardest_negatives[i].end());
  }
  return restricted_loss(embeddings, config.temperature, anchor_sets,
                         mined.hardest_positives);
}

LossResult batch_loss(const Eigen::Ref<const Matrix>& embeddings,
                      const std::vector<int>& labels, const SupConConfig& config) {
  return config.mining == Mining::kHard ? mined_supcon_loss(embeddings, labels, config)
                                        : supcon_loss(embeddings, labels, config);
}

}  // namespace confit
