#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "confit/dataio.hpp"
#include "confit/encoder.hpp"
#include "confit/supcon.hpp"

namespace confit {

// Bias-corrected Adam over a flat parameter vector.
struct AdamState {
  double learning_rate;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  long step_count = 0;
  Vector first_moment;
  Vector second_moment;

  AdamState(Eigen::Index size, double lr);
};
void adam_step(Vector& params, const Eigen::Ref<const Vector>& grads, AdamState& state);

struct TrainConfig {
  int epochs = 40;
  double learning_rate = 5e-5;
  int batch_classes = 5;  // classes per batch
  int per_class = 4;      // clips per class per batch
  int eval_every = 1;     // epochs between validation passes, 0 disables
  SupConConfig supcon;
  std::vector<int> encoder_hidden = {128};
  int embed_dim = 64;        // encoder output width
  int projection_dim = 32;   // head output width
  int projector_hidden = 0;  // 0 keeps the head a single linear layer
  void validate() const;
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  std::optional<double> val_accuracy;
  double seconds = 0.0;
};
struct TrainingTrace {
  std::vector<EpochRecord> epochs;
};
// Columns: epoch,train_loss,val_accuracy,seconds (val_accuracy empty when the
// epoch was not evaluated).
void save_trace_csv(const TrainingTrace& trace, const std::string& path);

struct PairTuneResult {
  EncoderParams encoder;
  TrainingTrace trace;
};
// Stage 1: joint contrastive training of encoder and projection head; the
// head is dropped from the result. Initialization order from rng: encoder
// first, then head. Per-epoch val_accuracy is the nearest class-mean proxy.
PairTuneResult pairtune(const Dataset& train, const Dataset& val, const TrainConfig& config,
                        Rng& rng);

struct LinearProbe {
  Matrix weight;  // classes x embed_dim
  Vector bias;    // classes
};

struct GridSearchSpec {
  std::vector<double> learning_rates = {1e-3, 1e-2, 1e-1};
  std::vector<int> batch_sizes = {16, 32, 64};
  int probe_epochs = 100;
  void validate() const;
};
struct GridCellResult {
  double learning_rate = 0.0;
  int batch_size = 0;
  double val_accuracy = 0.0;
};
struct ProbeResult {
  LinearProbe probe;
  GridCellResult best;
  std::vector<GridCellResult> cells;  // learning rate ascending, then batch size
};
// Stage 2: the encoder is frozen, embeddings are computed once, and a linear
// softmax classifier is trained per grid cell (zero init, cell-derived rng for
// batch order). Ties prefer the lower learning rate, then the smaller batch.
ProbeResult linear_probe(const EncoderParams& encoder, const Dataset& train, const Dataset& val,
                         const GridSearchSpec& grid, Rng& rng);

struct FineTuneResult {
  EncoderParams encoder;
  LinearProbe head;
  TrainingTrace trace;
};
// End-to-end cross-entropy baseline over the same encoder architecture and
// sampler. Initialization order from rng: encoder first, then head.
FineTuneResult finetune_baseline(const Dataset& train, const Dataset& val,
                                 const TrainConfig& config, Rng& rng);

struct Evaluation {
  double accuracy = 0.0;
  Eigen::MatrixXi confusion;  // true class x predicted class
};
Evaluation evaluate(const EncoderParams& encoder, const LinearProbe& probe,
                    const Dataset& dataset);

// Softmax cross-entropy, mean over rows; gradient w.r.t. the logits.
struct XentResult {
  double loss = 0.0;
  Matrix grad_logits;
};
XentResult softmax_xent(const Eigen::Ref<const Matrix>& logits, const std::vector<int>& labels);

// Classifier-free progress proxy: accuracy of nearest class-mean (by cosine)
// on the validation set, with class means taken from the train set.
double centroid_accuracy(const EncoderParams& encoder, const Dataset& train, const Dataset& val);

// Parameters used at inference time: encoder plus linear classifier.
Eigen::Index inference_param_count(const EncoderParams& encoder, const LinearProbe& probe);

}  // namespace confit
