#include "confit/numeric.hpp"

#include <algorithm>
#include <cmath>

namespace confit {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}
}  // namespace

std::uint64_t Rng::next_u64() {
  counter_ += 0x9E3779B97F4A7C15ULL;
  return mix64(counter_);
}

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = 1.0 - uniform();  // (0, 1], keeps the log finite
  double u2 = uniform();
  double radius = std::sqrt(-2.0 * std::log(u1));
  double angle = kTwoPi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

int Rng::uniform_int(int n) {
  if (n <= 0) throw InvalidSpecError("uniform_int: n must be positive");
  // Lemire reduction; bias is far below anything observable at these ranges.
  unsigned __int128 wide = static_cast<unsigned __int128>(next_u64()) *
                           static_cast<std::uint64_t>(n);
  return static_cast<int>(wide >> 64);
}

Rng Rng::derive(std::uint64_t stream) const {
  return Rng(mix64(seed_ ^ (0xD1B54A32D192ED03ULL * (stream + 1))));
}

Vector gaussian_vector(Eigen::Index size, Rng& rng) {
  Vector v(size);
  for (Eigen::Index i = 0; i < size; ++i) v(i) = rng.normal();
  return v;
}

Matrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.normal();
  return m;
}

Vector l2_normalize(const Eigen::Ref<const Vector>& v) {
  if (v.size() == 0) throw DimensionMismatchError("l2_normalize: empty vector");
  double norm = v.norm();
  if (norm < kZeroNormTol) throw ZeroNormError("l2_normalize: vector norm below 1e-12");
  return v / norm;
}

double cosine_sim(const Eigen::Ref<const Vector>& u, const Eigen::Ref<const Vector>& v) {
  if (u.size() != v.size())
    throw DimensionMismatchError("cosine_sim: sizes " + std::to_string(u.size()) +
                                 " and " + std::to_string(v.size()));
  if (u.size() == 0) throw DimensionMismatchError("cosine_sim: empty vectors");
  double uu = u.dot(u);
  double vv = v.dot(v);
  if (std::sqrt(uu) < kZeroNormTol) throw ZeroNormError("cosine_sim: first vector has zero norm");
  if (std::sqrt(vv) < kZeroNormTol) throw ZeroNormError("cosine_sim: second vector has zero norm");
  // sqrt(uu * vv) instead of sqrt(uu) * sqrt(vv): for bitwise-equal inputs the
  // quotient is then exactly 1 (sqrt(x * x) == x in round-to-nearest).
  double c = u.dot(v) / std::sqrt(uu * vv);
  return std::clamp(c, -1.0, 1.0);
}

Matrix pairwise_cosine_matrix(const Eigen::Ref<const Matrix>& embeddings) {
  const Eigen::Index n = embeddings.rows();
  if (n < 2) throw DimensionMismatchError("pairwise_cosine_matrix: need at least 2 rows");
  // Column-major transpose makes each row contiguous for the dot products.
  Matrix cols = embeddings.transpose();
  Vector sq(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    sq(i) = cols.col(i).dot(cols.col(i));
    if (std::sqrt(sq(i)) < kZeroNormTol)
      throw ZeroNormError("pairwise_cosine_matrix: row " + std::to_string(i) + " has zero norm");
  }
  Matrix out(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      double c = cols.col(i).dot(cols.col(j)) / std::sqrt(sq(i) * sq(j));
      c = std::clamp(c, -1.0, 1.0);
      out(i, j) = c;
      out(j, i) = c;
    }
  }
  return out;
}

Matrix normalize_rows(const Eigen::Ref<const Matrix>& m) {
  Matrix out(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    double norm = m.row(i).norm();
    if (norm < kZeroNormTol)
      throw ZeroNormError("normalize_rows: row " + std::to_string(i) + " has zero norm");
    out.row(i) = m.row(i) / norm;
  }
  return out;
}

}  // namespace confit
