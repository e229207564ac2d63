#include "confit/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>

namespace confit {

namespace {

// Neumaier compensated sum; pair counts get large enough that naive
// accumulation would eat into the 1e-10 agreement the contribution profile is
// held to.
struct CompensatedSum {
  double sum = 0.0;
  double comp = 0.0;
  void add(double x) {
    const double t = sum + x;
    if (std::abs(sum) >= std::abs(x))
      comp += (sum - t) + x;
    else
      comp += (x - t) + sum;
    sum = t;
  }
  double value() const { return sum + comp; }
};

Vector row_square_norms(const Matrix& cols, const char* who) {
  Vector sq(cols.cols());
  for (Eigen::Index i = 0; i < cols.cols(); ++i) {
    sq(i) = cols.col(i).dot(cols.col(i));
    if (std::sqrt(sq(i)) < kZeroNormTol)
      throw ZeroNormError(std::string(who) + ": row " + std::to_string(i) + " has zero norm");
  }
  return sq;
}

Matrix pca_impl(const Eigen::Ref<const Matrix>& embeddings, bool pad) {
  if (embeddings.rows() < 3)
    throw DimensionMismatchError("pca_project_2d: need at least 3 rows");
  Matrix centered = embeddings.rowwise() - embeddings.colwise().mean();
  Eigen::BDCSVD<Matrix> svd(centered, Eigen::ComputeThinV);
  const Vector& sv = svd.singularValues();
  const double leading = sv.size() > 0 ? sv(0) : 0.0;
  int rank = 0;
  for (Eigen::Index k = 0; k < sv.size(); ++k)
    if (sv(k) > leading * 1e-12 && sv(k) > kZeroNormTol) ++rank;
  if (rank < 2 && !pad)
    throw RankDeficientError("pca_project_2d: centered rank " + std::to_string(rank) +
                             ", need 2");
  Matrix coords = Matrix::Zero(embeddings.rows(), 2);
  const int keep = std::min(rank, 2);
  for (int k = 0; k < keep; ++k) {
    Vector component = svd.matrixV().col(k);
    Eigen::Index at = 0;
    component.array().abs().maxCoeff(&at);
    if (component(at) < 0.0) component = -component;
    coords.col(k) = centered * component;
  }
  return coords;
}

}  // namespace

double anisotropy(const Eigen::Ref<const Matrix>& embeddings) {
  const Eigen::Index n = embeddings.rows();
  if (n < 2) throw DimensionMismatchError("anisotropy: need at least 2 rows");
  const Matrix cols = embeddings.transpose();
  const Vector sq = row_square_norms(cols, "anisotropy");
  CompensatedSum acc;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      // sqrt(sq_i * sq_j) keeps bitwise-identical rows at exactly 1
      const double c = cols.col(i).dot(cols.col(j)) / std::sqrt(sq(i) * sq(j));
      acc.add(std::clamp(c, -1.0, 1.0));
    }
  }
  const double pairs = 0.5 * static_cast<double>(n) * static_cast<double>(n - 1);
  return acc.value() / pairs;
}

DimContributionProfile dim_contribution(const Eigen::Ref<const Matrix>& embeddings) {
  const Eigen::Index n = embeddings.rows();
  if (n < 2) throw DimensionMismatchError("dim_contribution: need at least 2 rows");
  const Matrix unit = normalize_rows(embeddings);
  const Eigen::Index dims = unit.cols();

  // sum_{i<j} x_i x_j = ((sum_i x_i)^2 - sum_i x_i^2) / 2 per dimension
  const Eigen::ArrayXd colsum = unit.colwise().sum().transpose().array();
  const Eigen::ArrayXd sumsq = unit.array().square().colwise().sum().transpose();
  const double denom = static_cast<double>(n) * static_cast<double>(n - 1);

  DimContributionProfile profile;
  profile.contributions = ((colsum.square() - sumsq) / denom).matrix();

  profile.ranked_dims.resize(static_cast<std::size_t>(dims));
  std::iota(profile.ranked_dims.begin(), profile.ranked_dims.end(), 0);
  std::sort(profile.ranked_dims.begin(), profile.ranked_dims.end(), [&](int a, int b) {
    const double ma = std::abs(profile.contributions(a));
    const double mb = std::abs(profile.contributions(b));
    return ma != mb ? ma > mb : a < b;
  });

  const double total = profile.contributions.array().abs().sum();
  if (total < 1e-12)
    throw DegenerateTotalError("dim_contribution: total |contribution| below 1e-12");

  profile.cumulative_share.resize(dims);
  double running = 0.0;
  for (Eigen::Index k = 0; k < dims; ++k) {
    running += std::abs(profile.contributions(profile.ranked_dims[static_cast<std::size_t>(k)]));
    profile.cumulative_share(k) = running / total;
  }
  for (int k = 1; k <= 3; ++k)
    profile.top_k_share[static_cast<std::size_t>(k - 1)] =
        profile.cumulative_share(std::min<Eigen::Index>(k, dims) - 1);

  const double thresholds[3] = {0.5, 0.8, 0.9};
  for (int t = 0; t < 3; ++t) {
    int needed = static_cast<int>(dims);
    for (Eigen::Index k = 0; k < dims; ++k) {
      if (profile.cumulative_share(k) >= thresholds[t]) {
        needed = static_cast<int>(k) + 1;
        break;
      }
    }
    profile.dims_to_share[static_cast<std::size_t>(t)] = needed;
  }
  return profile;
}

Matrix class_mean_embeddings(const EncoderParams& encoder, const Dataset& dataset) {
  dataset.validate();
  Matrix sums = Matrix::Zero(dataset.class_count, encoder.output_dim());
  std::vector<int> counts(static_cast<std::size_t>(dataset.class_count), 0);
  for (const auto& clip : dataset.clips) {
    sums.row(clip.label) += encode(encoder, clip).representation.transpose();
    ++counts[static_cast<std::size_t>(clip.label)];
  }
  Matrix means(dataset.class_count, encoder.output_dim());
  for (int c = 0; c < dataset.class_count; ++c) {
    if (counts[static_cast<std::size_t>(c)] == 0)
      throw MissingClassError("class_mean_embeddings: class " + std::to_string(c) +
                              " absent from dataset");
    const Vector mean =
        sums.row(c).transpose() / static_cast<double>(counts[static_cast<std::size_t>(c)]);
    means.row(c) = l2_normalize(mean).transpose();
  }
  return means;
}

std::vector<std::vector<int>> difficult_groups(const Eigen::MatrixXi& confusion, int group_size,
                                               int n_groups) {
  const int classes = static_cast<int>(confusion.rows());
  if (confusion.rows() != confusion.cols())
    throw DimensionMismatchError("difficult_groups: confusion must be square");
  if (group_size < 2) throw InvalidSpecError("difficult_groups: group_size must be >= 2");
  if (n_groups < 1) throw InvalidSpecError("difficult_groups: n_groups must be >= 1");
  if (group_size * n_groups > classes)
    throw InsufficientClassesError("difficult_groups: " + std::to_string(n_groups) +
                                   " groups of " + std::to_string(group_size) + " need " +
                                   std::to_string(group_size * n_groups) + " classes, have " +
                                   std::to_string(classes));
  if (confusion.minCoeff() < 0)
    throw InvalidSpecError("difficult_groups: negative confusion count");

  Eigen::Matrix<long long, Eigen::Dynamic, Eigen::Dynamic> mass(classes, classes);
  for (int i = 0; i < classes; ++i)
    for (int j = 0; j < classes; ++j)
      mass(i, j) = i == j ? 0
                          : static_cast<long long>(confusion(i, j)) +
                                static_cast<long long>(confusion(j, i));

  std::vector<char> used(static_cast<std::size_t>(classes), 0);
  std::vector<std::vector<int>> groups;
  for (int g = 0; g < n_groups; ++g) {
    long long best = -1;
    int seed_a = -1;
    int seed_b = -1;
    for (int i = 0; i < classes; ++i) {
      if (used[static_cast<std::size_t>(i)]) continue;
      for (int j = i + 1; j < classes; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        if (mass(i, j) > best) {
          best = mass(i, j);
          seed_a = i;
          seed_b = j;
        }
      }
    }
    std::vector<int> group = {seed_a, seed_b};
    std::vector<char> in_group(static_cast<std::size_t>(classes), 0);
    in_group[static_cast<std::size_t>(seed_a)] = 1;
    in_group[static_cast<std::size_t>(seed_b)] = 1;
    while (static_cast<int>(group.size()) < group_size) {
      long long best_gain = -1;
      int best_cand = -1;
      for (int cand = 0; cand < classes; ++cand) {
        if (used[static_cast<std::size_t>(cand)] || in_group[static_cast<std::size_t>(cand)])
          continue;
        long long gain = 0;
        for (int member : group) gain += mass(cand, member);
        if (gain > best_gain) {
          best_gain = gain;
          best_cand = cand;
        }
      }
      group.push_back(best_cand);
      in_group[static_cast<std::size_t>(best_cand)] = 1;
    }
    for (int member : group) used[static_cast<std::size_t>(member)] = 1;
    std::sort(group.begin(), group.end());
    groups.push_back(std::move(group));
  }
  return groups;
}

Matrix pca_project_2d(const Eigen::Ref<const Matrix>& embeddings) {
  return pca_impl(embeddings, false);
}

Matrix pca_project_2d_padded(const Eigen::Ref<const Matrix>& embeddings) {
  return pca_impl(embeddings, true);
}

double within_between_gap(const Eigen::Ref<const Matrix>& embeddings,
                          const std::vector<int>& labels) {
  const Eigen::Index n = embeddings.rows();
  if (n < 2) throw DimensionMismatchError("within_between_gap: need at least 2 rows");
  if (static_cast<Eigen::Index>(labels.size()) != n)
    throw DimensionMismatchError("within_between_gap: " + std::to_string(labels.size()) +
                                 " labels for " + std::to_string(n) + " rows");
  const Matrix cols = embeddings.transpose();
  const Vector sq = row_square_norms(cols, "within_between_gap");
  CompensatedSum within;
  CompensatedSum between;
  long within_count = 0;
  long between_count = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double c =
          std::clamp(cols.col(i).dot(cols.col(j)) / std::sqrt(sq(i) * sq(j)), -1.0, 1.0);
      if (labels[static_cast<std::size_t>(i)] == labels[static_cast<std::size_t>(j)]) {
        within.add(c);
        ++within_count;
      } else {
        between.add(c);
        ++between_count;
      }
    }
  }
  if (within_count == 0)
    throw NoPositiveError("within_between_gap: no same-label pair");
  if (between_count == 0)
    throw NoNegativeError("within_between_gap: no different-label pair");
  return within.value() / static_cast<double>(within_count) -
         between.value() / static_cast<double>(between_count);
}

DiagnosticsReport run_diagnostics(const EncoderParams& encoder, const Dataset& dataset,
                                  const Eigen::MatrixXi& confusion, int group_size,
                                  int n_groups) {
  dataset.validate();
  if (dataset.class_count < 2)
    throw MissingClassError("run_diagnostics: need at least 2 classes, have " +
                            std::to_string(dataset.class_count));
  if (confusion.rows() != dataset.class_count || confusion.cols() != dataset.class_count)
    throw DimensionMismatchError("run_diagnostics: confusion shape vs class_count");

  const Eigen::Index n = dataset.size();
  Matrix emb(n, encoder.output_dim());
  for (Eigen::Index i = 0; i < n; ++i)
    emb.row(i) = encode(encoder, dataset.clips[static_cast<std::size_t>(i)])
                     .representation.transpose();

  DiagnosticsReport report;
  report.anisotropy_value = anisotropy(emb);
  report.dim_profile = dim_contribution(class_mean_embeddings(encoder, dataset));
  report.confusion = confusion;
  report.difficult_class_groups = difficult_groups(confusion, group_size, n_groups);
  report.projection_2d = pca_project_2d_padded(emb);
  report.separability_gap = within_between_gap(emb, dataset.labels());
  return report;
}

void write_projection_csv(const Dataset& dataset, const Eigen::Ref<const Matrix>& coords,
                          const std::string& path) {
  if (coords.rows() != dataset.size() || coords.cols() != 2)
    throw DimensionMismatchError("write_projection_csv: coords must be N x 2");
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "clip_id,label,x,y\n";
  char buf[40];
  for (int i = 0; i < dataset.size(); ++i) {
    const auto& clip = dataset.clips[static_cast<std::size_t>(i)];
    out << clip.clip_id << ',' << clip.label;
    for (int k = 0; k < 2; ++k) {
      std::snprintf(buf, sizeof(buf), "%.17g", coords(i, k));
      out << ',' << buf;
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed for " + path);
}

}  // namespace confit
