#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <utility>
#include <vector>

#include "confit/errors.hpp"

namespace confit {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Norms below this are treated as degenerate.
inline constexpr double kZeroNormTol = 1e-12;

// Counter-based generator (splitmix64 core). The same seed always yields the
// same draw sequence; derive() builds a child stream from the original seed
// only, so child streams do not depend on how far the parent has advanced.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), counter_(seed) {}

  std::uint64_t next_u64();
  double uniform();                        // [0, 1)
  double uniform(double lo, double hi);
  double normal();                         // standard Gaussian, Box-Muller
  int uniform_int(int n);                  // [0, n), n > 0
  Rng derive(std::uint64_t stream) const;

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (int i = static_cast<int>(items.size()) - 1; i > 0; --i) {
      int j = uniform_int(i + 1);
      std::swap(items[static_cast<std::size_t>(i)], items[static_cast<std::size_t>(j)]);
    }
  }

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Fill order is row-major so shapes can change without reshuffling draws.
Vector gaussian_vector(Eigen::Index size, Rng& rng);
Matrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng);

Vector l2_normalize(const Eigen::Ref<const Vector>& v);
double cosine_sim(const Eigen::Ref<const Vector>& u, const Eigen::Ref<const Vector>& v);

// Rows are embeddings. Result is symmetric, unit diagonal, entries in [-1, 1].
Matrix pairwise_cosine_matrix(const Eigen::Ref<const Matrix>& embeddings);

Matrix normalize_rows(const Eigen::Ref<const Matrix>& m);

}  // namespace confit
