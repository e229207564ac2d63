#pragma once

#include <array>
#include <string>
#include <vector>

#include "confit/dataio.hpp"
#include "confit/encoder.hpp"
#include "confit/numeric.hpp"

namespace confit {

// Mean pairwise cosine similarity over all unordered row pairs. High values
// mean the embeddings crowd one direction.
double anisotropy(const Eigen::Ref<const Matrix>& embeddings);

struct DimContributionProfile {
  // Per dimension, the mean over row pairs of the product of that coordinate;
  // the contributions sum to the anisotropy of the same rows.
  Vector contributions;
  std::vector<int> ranked_dims;       // by |contribution| descending, ties to lower index
  Vector cumulative_share;            // prefix sums of |contribution| over ranked order
  std::array<double, 3> top_k_share;  // k = 1, 2, 3
  std::array<int, 3> dims_to_share;   // smallest k reaching 50%, 80%, 90%
};
DimContributionProfile dim_contribution(const Eigen::Ref<const Matrix>& embeddings);

// One unit-norm row per class: the normalized mean of that class's clip
// representations.
Matrix class_mean_embeddings(const EncoderParams& encoder, const Dataset& dataset);

// Greedily extracts disjoint groups of classes with high mutual confusion
// mass conf(i,j) + conf(j,i): seed with the heaviest unused pair, then grow by
// the candidate adding the most mass. All ties break to the lower index.
// Groups are returned sorted ascending.
std::vector<std::vector<int>> difficult_groups(const Eigen::MatrixXi& confusion, int group_size,
                                               int n_groups);

// Projection onto the top-2 principal directions of the centered rows. Sign
// convention: each component's largest-magnitude loading is positive.
Matrix pca_project_2d(const Eigen::Ref<const Matrix>& embeddings);
// Same, but pads missing components with zeros instead of throwing
// RankDeficient.
Matrix pca_project_2d_padded(const Eigen::Ref<const Matrix>& embeddings);

// Mean same-label pairwise cosine minus mean different-label pairwise cosine.
double within_between_gap(const Eigen::Ref<const Matrix>& embeddings,
                          const std::vector<int>& labels);

struct DiagnosticsReport {
  double anisotropy_value = 0.0;
  DimContributionProfile dim_profile;  // over class mean embeddings
  Eigen::MatrixXi confusion;
  std::vector<std::vector<int>> difficult_class_groups;
  Matrix projection_2d;  // N x 2, row order matches dataset.clips
  double separability_gap = 0.0;
};

// The confusion matrix comes from the caller (whatever classifier was
// evaluated); everything else is computed from the encoder and dataset here.
DiagnosticsReport run_diagnostics(const EncoderParams& encoder, const Dataset& dataset,
                                  const Eigen::MatrixXi& confusion, int group_size,
                                  int n_groups);

// Columns: clip_id,label,x,y
void write_projection_csv(const Dataset& dataset, const Eigen::Ref<const Matrix>& coords,
                          const std::string& path);

}  // namespace confit
