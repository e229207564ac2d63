#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "confit/numeric.hpp"

namespace confit {

enum class Split { kTrain, kValidation };

// One clip: T frames of F features plus a class label.
struct FrameSequence {
  std::string clip_id;
  Matrix frames;  // T x F, T >= 1
  int label = 0;
};

struct Dataset {
  std::vector<FrameSequence> clips;
  int class_count = 0;
  Split split = Split::kTrain;

  int size() const { return static_cast<int>(clips.size()); }
  int feature_dim() const {
    return clips.empty() ? 0 : static_cast<int>(clips.front().frames.cols());
  }
  std::vector<int> labels() const;
  std::vector<int> clips_per_class() const;

  void validate() const;              // shared F, labels in range, unique ids
  void validate_train_split() const;  // additionally every class appears twice
};

struct SynthSpec {
  int class_count = 2;
  int clips_per_class = 10;
  int frame_count = 5;
  int feature_dim = 8;
  double class_separation = 6.0;  // mean pairwise distance between class means
  int shared_noise_dims = 0;      // leading dims replaced by nuisance values
  std::uint64_t seed = 0;

  void validate() const;
};

// Text format, one frame per row:
//   #confit-frames v1 classes=<C> dim=<F>
//   clip_id,frame_idx,label,f0,...,f<F-1>
Dataset load_frames_csv(const std::string& path);
void save_frames_csv(const Dataset& dataset, const std::string& path);

// Draws class means on a shared scale, then per-clip frames as mean plus unit
// Gaussian noise. The leading shared_noise_dims columns of every frame are
// replaced by one nuisance draw held constant across the clip, so those dims
// vary clip to clip but carry no class information. Returns a stratified
// 80/20 train/validation split.
std::pair<Dataset, Dataset> generate_clusters(const SynthSpec& spec, Rng& rng);

// Batches of batch_classes x per_class clip indices. Every batch member has
// at least one same-class and one different-class co-member. Each clip is
// used at most once per epoch; leftovers that cannot fill a batch are
// dropped.
class StratifiedBatchSampler {
 public:
  StratifiedBatchSampler(const Dataset& dataset, int batch_classes, int per_class);

  void start_epoch(Rng& rng);
  bool next(std::vector<int>& batch);  // false once the epoch is exhausted
  int batch_size() const { return batch_classes_ * per_class_; }

 private:
  const Dataset* dataset_;
  int batch_classes_;
  int per_class_;
  std::vector<std::vector<int>> by_class_;
  std::vector<std::vector<int>> epoch_batches_;
  std::size_t cursor_ = 0;
};

}  // namespace confit
