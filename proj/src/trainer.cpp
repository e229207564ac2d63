#include "confit/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "confit/diagnostics.hpp"

namespace confit {

namespace {

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int argmax_lowest(const Eigen::Ref<const Vector>& scores) {
  int best = 0;
  for (int k = 1; k < scores.size(); ++k)
    if (scores(k) > scores(best)) best = k;
  return best;
}

struct EmbeddedData {
  Matrix embeddings;
  std::vector<int> labels;
};

EmbeddedData embed_dataset(const EncoderParams& encoder, const Dataset& dataset) {
  EmbeddedData out;
  out.embeddings.resize(dataset.size(), encoder.output_dim());
  out.labels = dataset.labels();
  for (int i = 0; i < dataset.size(); ++i)
    out.embeddings.row(i) =
        encode(encoder, dataset.clips[static_cast<std::size_t>(i)]).representation.transpose();
  return out;
}

double probe_accuracy(const Matrix& embeddings, const std::vector<int>& labels,
                      const LinearProbe& probe) {
  int correct = 0;
  for (Eigen::Index i = 0; i < embeddings.rows(); ++i) {
    const Vector logits = probe.weight * embeddings.row(i).transpose() + probe.bias;
    if (argmax_lowest(logits) == labels[static_cast<std::size_t>(i)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(embeddings.rows());
}

// One grid cell: zero-initialized linear head trained with Adam; rng only
// drives the batch order, so the cell is convex and reproducible.
LinearProbe train_probe_cell(const Matrix& embeddings, const std::vector<int>& labels,
                             int class_count, double lr, int batch_size, int epochs, Rng rng) {
  const Eigen::Index n = embeddings.rows();
  const Eigen::Index dim = embeddings.cols();
  std::vector<DenseLayer> head(1);
  head[0].weight = Matrix::Zero(class_count, dim);
  head[0].bias = Vector::Zero(class_count);
  Vector flat = flatten_layers(head);
  AdamState adam(flat.size(), lr);

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < epochs; ++epoch) {
    rng.shuffle(order);
    for (Eigen::Index start = 0; start < n; start += batch_size) {
      const Eigen::Index count = std::min<Eigen::Index>(batch_size, n - start);
      Matrix batch(count, dim);
      std::vector<int> batch_labels(static_cast<std::size_t>(count));
      for (Eigen::Index i = 0; i < count; ++i) {
        const int src = order[static_cast<std::size_t>(start + i)];
        batch.row(i) = embeddings.row(src);
        batch_labels[static_cast<std::size_t>(i)] = labels[static_cast<std::size_t>(src)];
      }
      Matrix logits = batch * head[0].weight.transpose();
      logits.rowwise() += head[0].bias.transpose();
      const XentResult xent = softmax_xent(logits, batch_labels);
      std::vector<DenseLayer> grads(1);
      grads[0].weight = xent.grad_logits.transpose() * batch;
      grads[0].bias = xent.grad_logits.colwise().sum().transpose();
      adam_step(flat, flatten_layers(grads), adam);
      unflatten_layers(flat, head);
    }
  }
  return {head[0].weight, head[0].bias};
}

void check_train_val(const Dataset& train, const Dataset& val) {
  train.validate_train_split();
  val.validate();
  if (train.class_count != val.class_count)
    throw DimensionMismatchError("train/validation class_count mismatch: " +
                                 std::to_string(train.class_count) + " vs " +
                                 std::to_string(val.class_count));
  if (train.feature_dim() != val.feature_dim())
    throw DimensionMismatchError("train/validation feature dim mismatch: " +
                                 std::to_string(train.feature_dim()) + " vs " +
                                 std::to_string(val.feature_dim()));
}

}  // namespace

AdamState::AdamState(Eigen::Index size, double lr)
    : learning_rate(lr),
      first_moment(Vector::Zero(size)),
      second_moment(Vector::Zero(size)) {
  if (size < 1) throw InvalidSpecError("AdamState: empty parameter vector");
  if (!(lr > 0.0) || !std::isfinite(lr))
    throw InvalidSpecError("AdamState: learning_rate must be positive");
}

void adam_step(Vector& params, const Eigen::Ref<const Vector>& grads, AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size())
    throw ShapeMismatchError("adam_step: params " + std::to_string(params.size()) + ", grads " +
                             std::to_string(grads.size()) + ", state " +
                             std::to_string(state.first_moment.size()));
  state.step_count += 1;
  state.first_moment = state.beta1 * state.first_moment + (1.0 - state.beta1) * grads;
  state.second_moment = (state.beta2 * state.second_moment.array() +
                         (1.0 - state.beta2) * grads.array().square())
                            .matrix();
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
  params.array() -= state.learning_rate * (state.first_moment.array() / bc1) /
                    ((state.second_moment.array() / bc2).sqrt() + state.epsilon);
}

void TrainConfig::validate() const {
  if (epochs < 1) throw InvalidSpecError("TrainConfig: epochs must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    throw InvalidSpecError("TrainConfig: learning_rate must be positive");
  if (batch_classes < 2) throw InvalidSpecError("TrainConfig: batch_classes must be >= 2");
  if (per_class < 2) throw InvalidSpecError("TrainConfig: per_class must be >= 2");
  if (eval_every < 0) throw InvalidSpecError("TrainConfig: eval_every must be >= 0");
  if (embed_dim < 1) throw InvalidSpecError("TrainConfig: embed_dim must be >= 1");
  if (projection_dim < 2) throw InvalidSpecError("TrainConfig: projection_dim must be >= 2");
  if (projector_hidden < 0) throw InvalidSpecError("TrainConfig: projector_hidden must be >= 0");
  for (int h : encoder_hidden)
    if (h < 1) throw InvalidSpecError("TrainConfig: encoder hidden dims must be >= 1");
  supcon.validate();
}

void GridSearchSpec::validate() const {
  if (learning_rates.empty() || batch_sizes.empty())
    throw EmptyGridError("GridSearchSpec: learning_rates and batch_sizes must be non-empty");
  for (double lr : learning_rates)
    if (!(lr > 0.0) || !std::isfinite(lr))
      throw InvalidSpecError("GridSearchSpec: learning rates must be positive");
  for (int bs : batch_sizes)
    if (bs < 1) throw InvalidSpecError("GridSearchSpec: batch sizes must be >= 1");
  if (probe_epochs < 1) throw InvalidSpecError("GridSearchSpec: probe_epochs must be >= 1");
}

void save_trace_csv(const TrainingTrace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "epoch,train_loss,val_accuracy,seconds\n";
  char buf[40];
  for (const auto& rec : trace.epochs) {
    out << rec.epoch << ',';
    std::snprintf(buf, sizeof(buf), "%.17g", rec.train_loss);
    out << buf << ',';
    if (rec.val_accuracy) {
      std::snprintf(buf, sizeof(buf), "%.17g", *rec.val_accuracy);
      out << buf;
    }
    std::snprintf(buf, sizeof(buf), "%.6f", rec.seconds);
    out << ',' << buf << '\n';
  }
  if (!out) throw IoError("write failed for " + path);
}

PairTuneResult pairtune(const Dataset& train, const Dataset& val, const TrainConfig& config,
                        Rng& rng) {
  config.validate();
  check_train_val(train, val);

  EncoderParams encoder =
      init_encoder(train.feature_dim(), config.encoder_hidden, config.embed_dim, rng);
  ProjectionParams head =
      init_projection(config.embed_dim, config.projector_hidden, config.projection_dim, rng);
  StratifiedBatchSampler sampler(train, config.batch_classes, config.per_class);

  const Eigen::Index enc_count = param_count(encoder.layers);
  const Eigen::Index head_count = param_count(head.layers);
  Vector flat(enc_count + head_count);
  flat.head(enc_count) = flatten_layers(encoder.layers);
  flat.tail(head_count) = flatten_layers(head.layers);
  AdamState adam(flat.size(), config.learning_rate);

  TrainingTrace trace;
  std::vector<int> batch;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    sampler.start_epoch(rng);
    double loss_sum = 0.0;
    int batches = 0;
    while (sampler.next(batch)) {
      ++batches;
      const int b = static_cast<int>(batch.size());
      std::vector<ForwardCache> enc_caches(static_cast<std::size_t>(b));
      std::vector<ForwardCache> head_caches(static_cast<std::size_t>(b));
      Matrix z(b, config.projection_dim);
      std::vector<int> labels(static_cast<std::size_t>(b));
      for (int i = 0; i < b; ++i) {
        const auto& clip = train.clips[static_cast<std::size_t>(batch[static_cast<std::size_t>(i)])];
        auto enc_res = encode(encoder, clip);
        auto head_res = project(head, enc_res.representation);
        z.row(i) = head_res.projection.transpose();
        enc_caches[static_cast<std::size_t>(i)] = std::move(enc_res.cache);
        head_caches[static_cast<std::size_t>(i)] = std::move(head_res.cache);
        labels[static_cast<std::size_t>(i)] = clip.label;
      }
      const LossResult loss = batch_loss(z, labels, config.supcon);
      if (!std::isfinite(loss.loss))
        throw NonFiniteLossError("pairtune: epoch " + std::to_string(epoch) + " batch " +
                                 std::to_string(batches));
      loss_sum += loss.loss;

      auto enc_grads = zero_like(encoder.layers);
      auto head_grads = zero_like(head.layers);
      for (int i = 0; i < b; ++i) {
        auto [hg, grad_r] = project_backward(head, head_caches[static_cast<std::size_t>(i)],
                                             loss.grad.row(i).transpose());
        accumulate(head_grads, hg);
        accumulate(enc_grads,
                   encode_backward(encoder, enc_caches[static_cast<std::size_t>(i)], grad_r));
      }
      Vector grad_flat(flat.size());
      grad_flat.head(enc_count) = flatten_layers(enc_grads);
      grad_flat.tail(head_count) = flatten_layers(head_grads);
      adam_step(flat, grad_flat, adam);
      unflatten_layers(flat.head(enc_count), encoder.layers);
      unflatten_layers(flat.tail(head_count), head.layers);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = batches > 0 ? loss_sum / batches : 0.0;
    if (config.eval_every > 0 && epoch % config.eval_every == 0)
      rec.val_accuracy = centroid_accuracy(encoder, train, val);
    rec.seconds = seconds_since(t0);
    trace.epochs.push_back(rec);
  }
  return {std::move(encoder), std::move(trace)};
}

ProbeResult linear_probe(const EncoderParams& encoder, const Dataset& train, const Dataset& val,
                         const GridSearchSpec& grid, Rng& rng) {
  grid.validate();
  check_train_val(train, val);

  const EmbeddedData tr = embed_dataset(encoder, train);
  const EmbeddedData va = embed_dataset(encoder, val);

  std::vector<double> lrs = grid.learning_rates;
  std::vector<int> sizes = grid.batch_sizes;
  std::sort(lrs.begin(), lrs.end());
  std::sort(sizes.begin(), sizes.end());

  ProbeResult result;
  double best_acc = -1.0;
  std::uint64_t cell_index = 0;
  for (double lr : lrs) {
    for (int bs : sizes) {
      LinearProbe probe = train_probe_cell(tr.embeddings, tr.labels, train.class_count, lr, bs,
                                           grid.probe_epochs, rng.derive(cell_index));
      const double acc = probe_accuracy(va.embeddings, va.labels, probe);
      result.cells.push_back({lr, bs, acc});
      // strict > with ascending iteration: ties keep the lower lr, then the
      // smaller batch
      if (acc > best_acc) {
        best_acc = acc;
        result.probe = std::move(probe);
        result.best = result.cells.back();
      }
      ++cell_index;
    }
  }
  return result;
}

FineTuneResult finetune_baseline(const Dataset& train, const Dataset& val,
                                 const TrainConfig& config, Rng& rng) {
  config.validate();
  check_train_val(train, val);

  EncoderParams encoder =
      init_encoder(train.feature_dim(), config.encoder_hidden, config.embed_dim, rng);
  std::vector<DenseLayer> head =
      init_projection(config.embed_dim, 0, train.class_count, rng).layers;
  StratifiedBatchSampler sampler(train, config.batch_classes, config.per_class);

  const Eigen::Index enc_count = param_count(encoder.layers);
  const Eigen::Index head_count = param_count(head);
  Vector flat(enc_count + head_count);
  flat.head(enc_count) = flatten_layers(encoder.layers);
  flat.tail(head_count) = flatten_layers(head);
  AdamState adam(flat.size(), config.learning_rate);

  TrainingTrace trace;
  std::vector<int> batch;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    sampler.start_epoch(rng);
    double loss_sum = 0.0;
    int batches = 0;
    while (sampler.next(batch)) {
      ++batches;
      const int b = static_cast<int>(batch.size());
      std::vector<ForwardCache> enc_caches(static_cast<std::size_t>(b));
      Matrix reps(b, config.embed_dim);
      std::vector<int> labels(static_cast<std::size_t>(b));
      for (int i = 0; i < b; ++i) {
        const auto& clip = train.clips[static_cast<std::size_t>(batch[static_cast<std::size_t>(i)])];
        auto enc_res = encode(encoder, clip);
        reps.row(i) = enc_res.representation.transpose();
        enc_caches[static_cast<std::size_t>(i)] = std::move(enc_res.cache);
        labels[static_cast<std::size_t>(i)] = clip.label;
      }
      Matrix logits = reps * head[0].weight.transpose();
      logits.rowwise() += head[0].bias.transpose();
      const XentResult xent = softmax_xent(logits, labels);
      if (!std::isfinite(xent.loss))
        throw NonFiniteLossError("finetune: epoch " + std::to_string(epoch) + " batch " +
                                 std::to_string(batches));
      loss_sum += xent.loss;

      std::vector<DenseLayer> head_grads(1);
      head_grads[0].weight = xent.grad_logits.transpose() * reps;
      head_grads[0].bias = xent.grad_logits.colwise().sum().transpose();
      const Matrix grad_reps = xent.grad_logits * head[0].weight;
      auto enc_grads = zero_like(encoder.layers);
      for (int i = 0; i < b; ++i)
        accumulate(enc_grads, encode_backward(encoder, enc_caches[static_cast<std::size_t>(i)],
                                              grad_reps.row(i).transpose()));
      Vector grad_flat(flat.size());
      grad_flat.head(enc_count) = flatten_layers(enc_grads);
      grad_flat.tail(head_count) = flatten_layers(head_grads);
      adam_step(flat, grad_flat, adam);
      unflatten_layers(flat.head(enc_count), encoder.layers);
      unflatten_layers(flat.tail(head_count), head);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = batches > 0 ? loss_sum / batches : 0.0;
    if (config.eval_every > 0 && epoch % config.eval_every == 0)
      rec.val_accuracy =
          evaluate(encoder, {head[0].weight, head[0].bias}, val).accuracy;
    rec.seconds = seconds_since(t0);
    trace.epochs.push_back(rec);
  }
  return {std::move(encoder), {head[0].weight, head[0].bias}, std::move(trace)};
}

Evaluation evaluate(const EncoderParams& encoder, const LinearProbe& probe,
                    const Dataset& dataset) {
  dataset.validate();
  if (probe.weight.rows() != dataset.class_count)
    throw DimensionMismatchError("evaluate: probe has " + std::to_string(probe.weight.rows()) +
                                 " classes, dataset declares " +
                                 std::to_string(dataset.class_count));
  if (probe.weight.cols() != encoder.output_dim())
    throw DimensionMismatchError("evaluate: probe input dim " +
                                 std::to_string(probe.weight.cols()) + " vs encoder output " +
                                 std::to_string(encoder.output_dim()));
  if (probe.bias.size() != probe.weight.rows())
    throw DimensionMismatchError("evaluate: probe bias size vs weight rows");

  Evaluation eval;
  eval.confusion = Eigen::MatrixXi::Zero(dataset.class_count, dataset.class_count);
  int correct = 0;
  for (const auto& clip : dataset.clips) {
    const Vector r = encode(encoder, clip).representation;
    const Vector logits = probe.weight * r + probe.bias;
    const int pred = argmax_lowest(logits);
    eval.confusion(clip.label, pred) += 1;
    if (pred == clip.label) ++correct;
  }
  eval.accuracy = static_cast<double>(correct) / static_cast<double>(dataset.size());
  return eval;
}

XentResult softmax_xent(const Eigen::Ref<const Matrix>& logits, const std::vector<int>& labels) {
  const Eigen::Index rows = logits.rows();
  const Eigen::Index classes = logits.cols();
  if (rows < 1) throw DimensionMismatchError("softmax_xent: no rows");
  if (static_cast<Eigen::Index>(labels.size()) != rows)
    throw DimensionMismatchError("softmax_xent: " + std::to_string(labels.size()) +
                                 " labels for " + std::to_string(rows) + " rows");
  XentResult result;
  result.grad_logits.resize(rows, classes);
  double total = 0.0;
  for (Eigen::Index i = 0; i < rows; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= classes)
      throw UnknownLabelError("softmax_xent: label " + std::to_string(y) + " outside [0, " +
                              std::to_string(classes) + ")");
    const double top = logits.row(i).maxCoeff();
    const Eigen::ArrayXd shifted = (logits.row(i).array() - top).exp();
    const double denom = shifted.sum();
    total += std::log(denom) + top - logits(i, y);
    result.grad_logits.row(i) = (shifted / denom).matrix();
    result.grad_logits(i, y) -= 1.0;
  }
  result.loss = total / static_cast<double>(rows);
  result.grad_logits /= static_cast<double>(rows);
  return result;
}

double centroid_accuracy(const EncoderParams& encoder, const Dataset& train, const Dataset& val) {
  if (val.size() == 0) throw InvalidSpecError("centroid_accuracy: empty validation set");
  const Matrix centroids = class_mean_embeddings(encoder, train);
  int correct = 0;
  for (const auto& clip : val.clips) {
    const Vector scores = centroids * encode(encoder, clip).representation;
    if (argmax_lowest(scores) == clip.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(val.size());
}

Eigen::Index inference_param_count(const EncoderParams& encoder, const LinearProbe& probe) {
  return param_count(encoder.layers) + probe.weight.size() + probe.bias.size();
}

}  // namespace confit
