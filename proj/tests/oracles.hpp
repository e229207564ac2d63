#pragma once

// Independent reference implementations used to check the library. Everything
// here is written in plain loops over std::vector so a bug in the Eigen code
// cannot hide in its own oracle.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <utility>
#include <vector>

#include "confit/dataio.hpp"
#include "confit/numeric.hpp"

namespace oracles {

using confit::Matrix;
using confit::Rng;
using confit::Vector;

// ---------------------------------------------------------------------------
// finite differences

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

// Central differences, one coordinate at a time.
inline Vector finite_diff(const std::function<double(const Vector&)>& f, const Vector& x,
                          double h = 1e-5) {
  Vector g(x.size());
  Vector probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double keep = probe(i);
    probe(i) = keep + h;
    const double up = f(probe);
    probe(i) = keep - h;
    const double down = f(probe);
    probe(i) = keep;
    g(i) = (up - down) / (2.0 * h);
  }
  return g;
}

inline double max_rel_err(const Vector& analytic, const Vector& numeric) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < analytic.size(); ++i)
    worst = std::max(worst, rel_err(analytic(i), numeric(i)));
  return worst;
}

// ---------------------------------------------------------------------------
// plain-loop MLP, mirrors the tanh-hidden / linear-last convention

struct FlatLayer {
  std::vector<std::vector<double>> weight;  // fan_out x fan_in
  std::vector<double> bias;
};

inline std::vector<double> mlp_apply(const std::vector<FlatLayer>& layers,
                                     std::vector<double> x) {
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    std::vector<double> y(layer.weight.size(), 0.0);
    for (std::size_t r = 0; r < layer.weight.size(); ++r) {
      double acc = layer.bias[r];
      for (std::size_t c = 0; c < layer.weight[r].size(); ++c)
        acc += layer.weight[r][c] * x[c];
      y[r] = l + 1 < layers.size() ? std::tanh(acc) : acc;
    }
    x = std::move(y);
  }
  return x;
}

// Per-frame MLP, temporal mean, then l2 normalization; the whole encoder in
// scalar arithmetic.
inline std::vector<double> encode_scalar(const std::vector<FlatLayer>& layers,
                                         const std::vector<std::vector<double>>& frames) {
  const std::size_t out_dim = layers.back().weight.size();
  std::vector<double> pooled(out_dim, 0.0);
  for (const auto& frame : frames) {
    const std::vector<double> y = mlp_apply(layers, frame);
    for (std::size_t d = 0; d < out_dim; ++d) pooled[d] += y[d];
  }
  double sq = 0.0;
  for (std::size_t d = 0; d < out_dim; ++d) {
    pooled[d] /= static_cast<double>(frames.size());
    sq += pooled[d] * pooled[d];
  }
  const double norm = std::sqrt(sq);
  for (double& v : pooled) v /= norm;
  return pooled;
}

// ---------------------------------------------------------------------------
// contrastive loss in scalar form

// Full-set objective: anchors with no same-label co-member are skipped, loss
// is the mean over contributing anchors. No unit-norm guard, so the same
// formula can be finite-differenced on raw entries.
inline double supcon_scalar(const Matrix& z, const std::vector<int>& labels, double tau) {
  const int n = static_cast<int>(z.rows());
  double total = 0.0;
  int contributing = 0;
  for (int i = 0; i < n; ++i) {
    std::vector<int> pos;
    for (int j = 0; j < n; ++j)
      if (j != i && labels[static_cast<std::size_t>(j)] == labels[static_cast<std::size_t>(i)])
        pos.push_back(j);
    if (pos.empty()) continue;
    double denom = 0.0;
    for (int a = 0; a < n; ++a)
      if (a != i) denom += std::exp(z.row(i).dot(z.row(a)) / tau);
    double anchor = 0.0;
    for (int p : pos) anchor += std::log(std::exp(z.row(i).dot(z.row(p)) / tau) / denom);
    total += -anchor / static_cast<double>(pos.size());
    ++contributing;
  }
  return total / static_cast<double>(contributing);
}

// Restricted objective over frozen per-anchor sets: positives[i] are the
// numerator terms, candidates[i] the denominator. Anchors with empty
// positives are skipped.
inline double supcon_restricted_scalar(const Matrix& z,
                                       const std::vector<std::vector<int>>& positives,
                                       const std::vector<std::vector<int>>& candidates,
                                       double tau) {
  const int n = static_cast<int>(z.rows());
  double total = 0.0;
  int contributing = 0;
  for (int i = 0; i < n; ++i) {
    const auto& pos = positives[static_cast<std::size_t>(i)];
    if (pos.empty()) continue;
    double denom = 0.0;
    for (int a : candidates[static_cast<std::size_t>(i)])
      denom += std::exp(z.row(i).dot(z.row(a)) / tau);
    double anchor = 0.0;
    for (int p : pos) anchor += std::log(std::exp(z.row(i).dot(z.row(p)) / tau) / denom);
    total += -anchor / static_cast<double>(pos.size());
    ++contributing;
  }
  return total / static_cast<double>(contributing);
}

// Brute-force hard pair selection: full sort per anchor, lowest-cosine
// positives and highest-cosine negatives, ties to the lower index. Anchors
// without a positive get empty sets.
struct MinedSets {
  std::vector<std::vector<int>> positives;
  std::vector<std::vector<int>> negatives;
};

inline MinedSets mine_scalar(const Matrix& z, const std::vector<int>& labels, int k_pos,
                             int k_neg) {
  const int n = static_cast<int>(z.rows());
  MinedSets sets;
  sets.positives.resize(static_cast<std::size_t>(n));
  sets.negatives.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    std::vector<std::pair<double, int>> same;
    std::vector<std::pair<double, int>> diff;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      const double c = z.row(i).dot(z.row(j)) / (z.row(i).norm() * z.row(j).norm());
      if (labels[static_cast<std::size_t>(j)] == labels[static_cast<std::size_t>(i)])
        same.emplace_back(c, j);
      else
        diff.emplace_back(c, j);
    }
    if (same.empty()) continue;
    std::sort(same.begin(), same.end());  // cosine ascending, index breaks ties
    std::sort(diff.begin(), diff.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    const int np = std::min<int>(k_pos, static_cast<int>(same.size()));
    const int nn = std::min<int>(k_neg, static_cast<int>(diff.size()));
    for (int k = 0; k < np; ++k)
      sets.positives[static_cast<std::size_t>(i)].push_back(same[static_cast<std::size_t>(k)].second);
    for (int k = 0; k < nn; ++k)
      sets.negatives[static_cast<std::size_t>(i)].push_back(diff[static_cast<std::size_t>(k)].second);
  }
  return sets;
}

// ---------------------------------------------------------------------------
// diagnostics oracles

// Per-dimension contribution as a literal double loop over ordered pairs.
inline Vector dim_contribution_scalar(const Matrix& embeddings) {
  const Eigen::Index n = embeddings.rows();
  const Matrix unit = confit::normalize_rows(embeddings);
  Vector contrib = Vector::Zero(unit.cols());
  for (Eigen::Index d = 0; d < unit.cols(); ++d) {
    long double acc = 0.0L;
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        if (i != j) acc += static_cast<long double>(unit(i, d)) * unit(j, d);
    contrib(d) = static_cast<double>(acc / (static_cast<long double>(n) * (n - 1)));
  }
  return contrib;
}

inline double anisotropy_scalar(const Matrix& embeddings) {
  const Eigen::Index n = embeddings.rows();
  long double acc = 0.0L;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j)
      acc += confit::cosine_sim(embeddings.row(i).transpose(), embeddings.row(j).transpose());
  return static_cast<double>(acc / (0.5L * n * (n - 1)));
}

// Symmetrized off-diagonal pair mass, shared by the grouping oracles.
inline long long pair_mass(const Eigen::MatrixXi& confusion, int i, int j) {
  return static_cast<long long>(confusion(i, j)) + confusion(j, i);
}

inline long long group_mass(const Eigen::MatrixXi& confusion, const std::vector<int>& group) {
  long long total = 0;
  for (std::size_t a = 0; a < group.size(); ++a)
    for (std::size_t b = a + 1; b < group.size(); ++b)
      total += pair_mass(confusion, group[a], group[b]);
  return total;
}

// The greedy rule restated from scratch: seed with the heaviest unused pair,
// grow by the candidate with the largest summed mass to the current members,
// all ties to the lowest index.
inline std::vector<std::vector<int>> greedy_groups_scalar(const Eigen::MatrixXi& confusion,
                                                          int group_size, int n_groups) {
  const int classes = static_cast<int>(confusion.rows());
  std::vector<bool> used(static_cast<std::size_t>(classes), false);
  std::vector<std::vector<int>> groups;
  for (int g = 0; g < n_groups; ++g) {
    std::pair<int, int> seed{-1, -1};
    long long seed_mass = -1;
    for (int i = 0; i < classes; ++i)
      for (int j = i + 1; j < classes; ++j) {
        if (used[static_cast<std::size_t>(i)] || used[static_cast<std::size_t>(j)]) continue;
        if (pair_mass(confusion, i, j) > seed_mass) {
          seed_mass = pair_mass(confusion, i, j);
          seed = {i, j};
        }
      }
    std::vector<int> group{seed.first, seed.second};
    while (static_cast<int>(group.size()) < group_size) {
      int pick = -1;
      long long pick_gain = -1;
      for (int cand = 0; cand < classes; ++cand) {
        if (used[static_cast<std::size_t>(cand)]) continue;
        if (std::find(group.begin(), group.end(), cand) != group.end()) continue;
        long long gain = 0;
        for (int member : group) gain += pair_mass(confusion, cand, member);
        if (gain > pick_gain) {
          pick_gain = gain;
          pick = cand;
        }
      }
      group.push_back(pick);
    }
    for (int member : group) used[static_cast<std::size_t>(member)] = true;
    std::sort(group.begin(), group.end());
    groups.push_back(std::move(group));
  }
  return groups;
}

// Exhaustive best total mass over all ways to pick n_groups disjoint groups
// of group_size classes. Classes may be left unused, so each group's anchor
// ranges over every unused class; duplicate families are avoided by keeping
// the anchors (each group's smallest member) strictly increasing.
// Exponential, intended for ~10 classes.
inline long long best_grouping_mass(const Eigen::MatrixXi& confusion, int group_size,
                                    int n_groups) {
  const int classes = static_cast<int>(confusion.rows());
  long long best = -1;
  std::vector<bool> used(static_cast<std::size_t>(classes), false);

  std::function<void(int, int, long long)> place_group = [&](int groups_done, int min_anchor,
                                                             long long mass_so_far) {
    if (groups_done == n_groups) {
      best = std::max(best, mass_so_far);
      return;
    }
    for (int anchor = min_anchor; anchor < classes; ++anchor) {
      if (used[static_cast<std::size_t>(anchor)]) continue;
      std::vector<int> group{anchor};
      used[static_cast<std::size_t>(anchor)] = true;
      std::function<void(int)> extend = [&](int next_min) {
        if (static_cast<int>(group.size()) == group_size) {
          place_group(groups_done + 1, anchor + 1, mass_so_far + group_mass(confusion, group));
          return;
        }
        for (int c = next_min; c < classes; ++c) {
          if (used[static_cast<std::size_t>(c)]) continue;
          group.push_back(c);
          used[static_cast<std::size_t>(c)] = true;
          extend(c + 1);
          used[static_cast<std::size_t>(c)] = false;
          group.pop_back();
        }
      };
      extend(anchor + 1);
      used[static_cast<std::size_t>(anchor)] = false;
    }
  };
  place_group(0, 0, 0);
  return best;
}

// Confusion matrix with three planted triples of heavy mutual confusion over
// light background noise. Noise pair mass is at most 5; planted pair mass is
// at least 1000, so a non-planted triple (at most one planted pair) weighs at
// most 1060 while a planted one weighs at least 3000. Both the greedy rule
// and the exhaustive optimum then recover exactly the planted triples.
struct PlantedConfusion {
  Eigen::MatrixXi confusion;
  std::vector<std::vector<int>> triples;  // each sorted, order by smallest member
};

inline PlantedConfusion planted_confusion(Rng& rng) {
  const int classes = 10;
  std::vector<int> perm(classes);
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(perm);

  PlantedConfusion out;
  out.confusion = Eigen::MatrixXi::Zero(classes, classes);
  for (int i = 0; i < classes; ++i)
    for (int j = 0; j < classes; ++j)
      if (i != j) out.confusion(i, j) = rng.uniform_int(3);  // noise pair mass <= 4 < 5

  for (int t = 0; t < 3; ++t) {
    std::vector<int> triple{perm[static_cast<std::size_t>(3 * t)],
                            perm[static_cast<std::size_t>(3 * t + 1)],
                            perm[static_cast<std::size_t>(3 * t + 2)]};
    std::sort(triple.begin(), triple.end());
    for (std::size_t a = 0; a < 3; ++a)
      for (std::size_t b = a + 1; b < 3; ++b) {
        const int total = 1000 + rng.uniform_int(51);
        const int first = rng.uniform_int(total + 1);
        out.confusion(triple[a], triple[b]) = first;
        out.confusion(triple[b], triple[a]) = total - first;
      }
    out.triples.push_back(std::move(triple));
  }
  std::sort(out.triples.begin(), out.triples.end());
  for (int i = 0; i < classes; ++i) out.confusion(i, i) = 50 + rng.uniform_int(20);
  return out;
}

// ---------------------------------------------------------------------------
// misc

// Nearest class centroid over raw clip-mean frames, Euclidean distance. Used
// to sanity-check synthetic data without touching the encoder.
inline double raw_centroid_accuracy(const confit::Dataset& train, const confit::Dataset& val) {
  Matrix centroids = Matrix::Zero(train.class_count, train.feature_dim());
  std::vector<int> counts(static_cast<std::size_t>(train.class_count), 0);
  for (const auto& clip : train.clips) {
    centroids.row(clip.label) += clip.frames.colwise().mean();
    ++counts[static_cast<std::size_t>(clip.label)];
  }
  for (int c = 0; c < train.class_count; ++c)
    centroids.row(c) /= static_cast<double>(counts[static_cast<std::size_t>(c)]);
  int hits = 0;
  for (const auto& clip : val.clips) {
    const Vector x = clip.frames.colwise().mean().transpose();
    int best = 0;
    double best_dist = (centroids.row(0).transpose() - x).squaredNorm();
    for (int c = 1; c < train.class_count; ++c) {
      const double d = (centroids.row(c).transpose() - x).squaredNorm();
      if (d < best_dist) {
        best_dist = d;
        best = c;
      }
    }
    if (best == clip.label) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(val.size());
}

// Random orthogonal matrix from the QR of a Gaussian draw, diagonal signs
// fixed so the factorization is unique.
inline Matrix random_orthogonal(Eigen::Index dim, Rng& rng) {
  const Matrix g = confit::gaussian_matrix(dim, dim, rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index i = 0; i < dim; ++i)
    if (r(i, i) < 0.0) q.col(i) = -q.col(i);
  return q;
}

// Unit-norm embedding batch with labels drawn so at least two classes appear.
inline std::pair<Matrix, std::vector<int>> random_batch(int n, int dim, int classes, Rng& rng) {
  Matrix z = confit::normalize_rows(confit::gaussian_matrix(n, dim, rng));
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) labels[static_cast<std::size_t>(i)] = rng.uniform_int(classes);
  labels[0] = 0;
  labels[1] = 1;  // guarantees every anchor has a negative
  return {std::move(z), std::move(labels)};
}

}  // namespace oracles
