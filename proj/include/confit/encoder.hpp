#pragma once

#include <utility>
#include <vector>

#include "confit/dataio.hpp"
#include "confit/numeric.hpp"

namespace confit {

struct DenseLayer {
  Matrix weight;  // out x in
  Vector bias;    // out
};

// Per-frame MLP. tanh on every layer except the last, which stays linear.
// Frames are encoded independently, mean-pooled over time, then normalized
// to the unit sphere.
struct EncoderParams {
  std::vector<DenseLayer> layers;
  int input_dim() const;
  int output_dim() const;
};

// Projection head applied to the encoder output; same activation convention.
// A zero hidden width means a single linear layer.
struct ProjectionParams {
  std::vector<DenseLayer> layers;
  int input_dim() const;
  int output_dim() const;
};

// Weights drawn uniform(-s, s) with s = sqrt(6 / (fan_in + fan_out)), row-major
// draw order; biases start at zero.
EncoderParams init_encoder(int input_dim, const std::vector<int>& hidden_dims, int output_dim,
                           Rng& rng);
ProjectionParams init_projection(int input_dim, int hidden_dim, int output_dim, Rng& rng);

struct ForwardCache {
  std::vector<Matrix> activations;  // [0] is the input, then one per layer
  Vector pooled;                    // pre-normalization output u
  double pooled_norm = 0.0;
  Vector unit_output;               // u / |u|
};

struct EncodeResult {
  Vector representation;  // unit norm
  ForwardCache cache;
};
EncodeResult encode(const EncoderParams& params, const FrameSequence& clip);

using EncoderGrads = std::vector<DenseLayer>;
EncoderGrads encode_backward(const EncoderParams& params, const ForwardCache& cache,
                             const Eigen::Ref<const Vector>& grad_representation);

struct ProjectResult {
  Vector projection;  // unit norm
  ForwardCache cache;
};
ProjectResult project(const ProjectionParams& params,
                      const Eigen::Ref<const Vector>& representation);

using ProjectionGrads = std::vector<DenseLayer>;
// Returns parameter gradients and the gradient w.r.t. the input representation.
std::pair<ProjectionGrads, Vector> project_backward(const ProjectionParams& params,
                                                    const ForwardCache& cache,
                                                    const Eigen::Ref<const Vector>& grad_projection);

// Pulls a gradient back through x -> x / |x|. The result is orthogonal to the
// unit output.
Vector normalize_backward(const Eigen::Ref<const Vector>& unit, double pre_norm,
                          const Eigen::Ref<const Vector>& grad_unit);

// Flat parameter order: layers in sequence, weight row-major, then bias.
Eigen::Index param_count(const std::vector<DenseLayer>& layers);
Vector flatten_layers(const std::vector<DenseLayer>& layers);
void unflatten_layers(const Eigen::Ref<const Vector>& flat, std::vector<DenseLayer>& layers);
std::vector<DenseLayer> zero_like(const std::vector<DenseLayer>& layers);
void accumulate(std::vector<DenseLayer>& into, const std::vector<DenseLayer>& grads);

}  // namespace confit
