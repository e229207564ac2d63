#include "confit/encoder.hpp"

#include <cmath>

namespace confit {

namespace {

void check_chain(const std::vector<DenseLayer>& layers, const char* who) {
  if (layers.empty()) throw InvalidSpecError(std::string(who) + ": no layers");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    if (layer.weight.rows() < 1 || layer.weight.cols() < 1)
      throw InvalidSpecError(std::string(who) + ": empty layer " + std::to_string(l));
    if (layer.bias.size() != layer.weight.rows())
      throw DimensionMismatchError(std::string(who) + ": layer " + std::to_string(l) +
                                   " bias size " + std::to_string(layer.bias.size()) +
                                   " vs weight rows " + std::to_string(layer.weight.rows()));
    if (l > 0 && layers[l - 1].weight.rows() != layer.weight.cols())
      throw DimensionMismatchError(std::string(who) + ": layer " + std::to_string(l) +
                                   " input dim " + std::to_string(layer.weight.cols()) +
                                   " vs previous output " +
                                   std::to_string(layers[l - 1].weight.rows()));
  }
}

// Rows of the input are independent samples.
std::vector<Matrix> mlp_forward(const std::vector<DenseLayer>& layers, Matrix input) {
  std::vector<Matrix> acts;
  acts.reserve(layers.size() + 1);
  acts.push_back(std::move(input));
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    Matrix z = acts.back() * layer.weight.transpose();
    z.rowwise() += layer.bias.transpose();
    if (l + 1 < layers.size()) z = z.array().tanh().matrix();
    acts.push_back(std::move(z));
  }
  return acts;
}

// grad_out arrives on the last activation; returns per-layer gradients and the
// gradient on the input rows.
std::pair<std::vector<DenseLayer>, Matrix> mlp_backward(const std::vector<DenseLayer>& layers,
                                                        const std::vector<Matrix>& acts,
                                                        Matrix grad_out) {
  std::vector<DenseLayer> grads = zero_like(layers);
  for (int l = static_cast<int>(layers.size()) - 1; l >= 0; --l) {
    const auto lu = static_cast<std::size_t>(l);
    if (lu + 1 < layers.size()) {
      // act = tanh(z), so dz = da * (1 - act^2)
      grad_out = (grad_out.array() * (1.0 - acts[lu + 1].array().square())).matrix();
    }
    grads[lu].weight = grad_out.transpose() * acts[lu];
    grads[lu].bias = grad_out.colwise().sum().transpose();
    grad_out = grad_out * layers[lu].weight;
  }
  return {std::move(grads), std::move(grad_out)};
}

DenseLayer init_layer(int fan_in, int fan_out, Rng& rng) {
  const double s = std::sqrt(6.0 / (fan_in + fan_out));
  DenseLayer layer;
  layer.weight.resize(fan_out, fan_in);
  for (int r = 0; r < fan_out; ++r)
    for (int c = 0; c < fan_in; ++c) layer.weight(r, c) = rng.uniform(-s, s);
  layer.bias = Vector::Zero(fan_out);
  return layer;
}

}  // namespace

int EncoderParams::input_dim() const {
  return layers.empty() ? 0 : static_cast<int>(layers.front().weight.cols());
}
int EncoderParams::output_dim() const {
  return layers.empty() ? 0 : static_cast<int>(layers.back().weight.rows());
}
int ProjectionParams::input_dim() const {
  return layers.empty() ? 0 : static_cast<int>(layers.front().weight.cols());
}
int ProjectionParams::output_dim() const {
  return layers.empty() ? 0 : static_cast<int>(layers.back().weight.rows());
}

EncoderParams init_encoder(int input_dim, const std::vector<int>& hidden_dims, int output_dim,
                           Rng& rng) {
  if (input_dim < 1) throw InvalidSpecError("init_encoder: input_dim must be >= 1");
  if (output_dim < 1) throw InvalidSpecError("init_encoder: output_dim must be >= 1");
  for (int h : hidden_dims)
    if (h < 1) throw InvalidSpecError("init_encoder: hidden dims must be >= 1");
  EncoderParams params;
  int prev = input_dim;
  for (int h : hidden_dims) {
    params.layers.push_back(init_layer(prev, h, rng));
    prev = h;
  }
  params.layers.push_back(init_layer(prev, output_dim, rng));
  return params;
}

ProjectionParams init_projection(int input_dim, int hidden_dim, int output_dim, Rng& rng) {
  if (input_dim < 1) throw InvalidSpecError("init_projection: input_dim must be >= 1");
  if (output_dim < 2) throw InvalidSpecError("init_projection: output_dim must be >= 2");
  if (hidden_dim < 0) throw InvalidSpecError("init_projection: hidden_dim must be >= 0");
  ProjectionParams params;
  if (hidden_dim > 0) {
    params.layers.push_back(init_layer(input_dim, hidden_dim, rng));
    params.layers.push_back(init_layer(hidden_dim, output_dim, rng));
  } else {
    params.layers.push_back(init_layer(input_dim, output_dim, rng));
  }
  return params;
}

EncodeResult encode(const EncoderParams& params, const FrameSequence& clip) {
  check_chain(params.layers, "encode");
  if (clip.frames.rows() < 1)
    throw DimensionMismatchError("encode: clip '" + clip.clip_id + "' has no frames");
  if (clip.frames.cols() != params.input_dim())
    throw DimensionMismatchError("encode: clip '" + clip.clip_id + "' has feature dim " +
                                 std::to_string(clip.frames.cols()) + ", encoder expects " +
                                 std::to_string(params.input_dim()));
  ForwardCache cache;
  cache.activations = mlp_forward(params.layers, clip.frames);
  cache.pooled = cache.activations.back().colwise().mean().transpose();
  cache.pooled_norm = cache.pooled.norm();
  if (cache.pooled_norm < kZeroNormTol)
    throw ZeroNormError("encode: pooled output of clip '" + clip.clip_id + "' vanished");
  cache.unit_output = cache.pooled / cache.pooled_norm;
  Vector r = cache.unit_output;
  return {std::move(r), std::move(cache)};
}

EncoderGrads encode_backward(const EncoderParams& params, const ForwardCache& cache,
                             const Eigen::Ref<const Vector>& grad_representation) {
  if (grad_representation.size() != params.output_dim())
    throw DimensionMismatchError("encode_backward: gradient size " +
                                 std::to_string(grad_representation.size()) +
                                 " vs output dim " + std::to_string(params.output_dim()));
  Vector grad_pooled =
      normalize_backward(cache.unit_output, cache.pooled_norm, grad_representation);
  const Eigen::Index frames = cache.activations.front().rows();
  Matrix grad_frames =
      (grad_pooled.transpose() / static_cast<double>(frames)).replicate(frames, 1);
  auto [grads, grad_in] = mlp_backward(params.layers, cache.activations, std::move(grad_frames));
  (void)grad_in;
  return grads;
}

ProjectResult project(const ProjectionParams& params,
                      const Eigen::Ref<const Vector>& representation) {
  check_chain(params.layers, "project");
  if (representation.size() != params.input_dim())
    throw DimensionMismatchError("project: input size " +
                                 std::to_string(representation.size()) + ", head expects " +
                                 std::to_string(params.input_dim()));
  ForwardCache cache;
  cache.activations = mlp_forward(params.layers, representation.transpose());
  cache.pooled = cache.activations.back().row(0).transpose();
  cache.pooled_norm = cache.pooled.norm();
  if (cache.pooled_norm < kZeroNormTol)
    throw ZeroNormError("project: head output vanished");
  cache.unit_output = cache.pooled / cache.pooled_norm;
  Vector z = cache.unit_output;
  return {std::move(z), std::move(cache)};
}

std::pair<ProjectionGrads, Vector> project_backward(
    const ProjectionParams& params, const ForwardCache& cache,
    const Eigen::Ref<const Vector>& grad_projection) {
  if (grad_projection.size() != params.output_dim())
    throw DimensionMismatchError("project_backward: gradient size " +
                                 std::to_string(grad_projection.size()) + " vs output dim " +
                                 std::to_string(params.output_dim()));
  Vector grad_out = normalize_backward(cache.unit_output, cache.pooled_norm, grad_projection);
  auto [grads, grad_in] =
      mlp_backward(params.layers, cache.activations, grad_out.transpose());
  return {std::move(grads), grad_in.row(0).transpose()};
}

Vector normalize_backward(const Eigen::Ref<const Vector>& unit, double pre_norm,
                          const Eigen::Ref<const Vector>& grad_unit) {
  if (unit.size() != grad_unit.size())
    throw DimensionMismatchError("normalize_backward: size mismatch");
  if (pre_norm < kZeroNormTol) throw ZeroNormError("normalize_backward: zero pre-norm");
  return (grad_unit - unit * unit.dot(grad_unit)) / pre_norm;
}

Eigen::Index param_count(const std::vector<DenseLayer>& layers) {
  Eigen::Index total = 0;
  for (const auto& layer : layers) total += layer.weight.size() + layer.bias.size();
  return total;
}

Vector flatten_layers(const std::vector<DenseLayer>& layers) {
  Vector flat(param_count(layers));
  Eigen::Index at = 0;
  for (const auto& layer : layers) {
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) flat(at++) = layer.weight(r, c);
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) flat(at++) = layer.bias(i);
  }
  return flat;
}

void unflatten_layers(const Eigen::Ref<const Vector>& flat, std::vector<DenseLayer>& layers) {
  if (flat.size() != param_count(layers))
    throw ShapeMismatchError("unflatten_layers: expected " +
                             std::to_string(param_count(layers)) + " values, got " +
                             std::to_string(flat.size()));
  Eigen::Index at = 0;
  for (auto& layer : layers) {
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = flat(at++);
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias(i) = flat(at++);
  }
}

std::vector<DenseLayer> zero_like(const std::vector<DenseLayer>& layers) {
  std::vector<DenseLayer> out;
  out.reserve(layers.size());
  for (const auto& layer : layers)
    out.push_back({Matrix::Zero(layer.weight.rows(), layer.weight.cols()),
                   Vector::Zero(layer.bias.size())});
  return out;
}

void accumulate(std::vector<DenseLayer>& into, const std::vector<DenseLayer>& grads) {
  if (into.size() != grads.size()) throw ShapeMismatchError("accumulate: layer count mismatch");
  for (std::size_t l = 0; l < into.size(); ++l) {
    if (into[l].weight.rows() != grads[l].weight.rows() ||
        into[l].weight.cols() != grads[l].weight.cols())
      throw ShapeMismatchError("accumulate: weight shape mismatch at layer " + std::to_string(l));
    into[l].weight += grads[l].weight;
    into[l].bias += grads[l].bias;
  }
}

}  // namespace confit
