#include "confit/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace confit {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(',', start);
    if (pos == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

int parse_int(const std::string& s, const std::string& context) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw ParseError(context + ": expected integer, got '" + s + "'");
  return value;
}

double parse_double(const std::string& s, const std::string& context) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw ParseError(context + ": expected number, got '" + s + "'");
  return value;
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

std::string line_ref(const std::string& path, int line_no) {
  return path + " line " + std::to_string(line_no);
}

}  // namespace

std::vector<int> Dataset::labels() const {
  std::vector<int> out;
  out.reserve(clips.size());
  for (const auto& clip : clips) out.push_back(clip.label);
  return out;
}

std::vector<int> Dataset::clips_per_class() const {
  std::vector<int> counts(static_cast<std::size_t>(std::max(class_count, 0)), 0);
  for (const auto& clip : clips)
    if (clip.label >= 0 && clip.label < class_count)
      ++counts[static_cast<std::size_t>(clip.label)];
  return counts;
}

void Dataset::validate() const {
  if (class_count < 1) throw InvalidSpecError("Dataset: class_count must be positive");
  if (clips.empty()) throw InvalidSpecError("Dataset: no clips");
  const Eigen::Index dim = clips.front().frames.cols();
  std::unordered_set<std::string> ids;
  for (const auto& clip : clips) {
    if (clip.frames.rows() < 1)
      throw InvalidSpecError("Dataset: clip '" + clip.clip_id + "' has no frames");
    if (clip.frames.cols() != dim)
      throw DimensionMismatchError("Dataset: clip '" + clip.clip_id + "' has feature dim " +
                                   std::to_string(clip.frames.cols()) + ", expected " +
                                   std::to_string(dim));
    if (clip.label < 0 || clip.label >= class_count)
      throw UnknownLabelError("Dataset: clip '" + clip.clip_id + "' label " +
                              std::to_string(clip.label) + " outside [0, " +
                              std::to_string(class_count) + ")");
    if (!ids.insert(clip.clip_id).second)
      throw InvalidSpecError("Dataset: duplicate clip_id '" + clip.clip_id + "'");
    if (!clip.frames.allFinite())
      throw InvalidSpecError("Dataset: clip '" + clip.clip_id + "' contains non-finite values");
  }
}

void Dataset::validate_train_split() const {
  validate();
  auto counts = clips_per_class();
  for (int c = 0; c < class_count; ++c) {
    if (counts[static_cast<std::size_t>(c)] < 2)
      throw InvalidSpecError("Dataset: class " + std::to_string(c) + " has " +
                             std::to_string(counts[static_cast<std::size_t>(c)]) +
                             " train clips, need at least 2");
  }
}

void SynthSpec::validate() const {
  if (class_count < 1) throw InvalidSpecError("SynthSpec: class_count must be >= 1");
  if (clips_per_class < 2) throw InvalidSpecError("SynthSpec: clips_per_class must be >= 2");
  if (frame_count < 1) throw InvalidSpecError("SynthSpec: frame_count must be >= 1");
  if (feature_dim < 1) throw InvalidSpecError("SynthSpec: feature_dim must be >= 1");
  if (!(class_separation >= 0.0))
    throw InvalidSpecError("SynthSpec: class_separation must be >= 0");
  if (shared_noise_dims < 0 || shared_noise_dims >= feature_dim)
    throw InvalidSpecError("SynthSpec: shared_noise_dims must lie in [0, feature_dim)");
}

Dataset load_frames_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(line_ref(path, 1) + ": missing header");
  strip_cr(line);

  std::vector<std::string> head;
  {
    std::istringstream iss(line);
    std::string tok;
    while (iss >> tok) head.push_back(tok);
  }
  if (head.size() != 4 || head[0] != "#confit-frames" || head[1] != "v1" ||
      head[2].rfind("classes=", 0) != 0 || head[3].rfind("dim=", 0) != 0)
    throw ParseError(line_ref(path, 1) +
                     ": bad header, expected '#confit-frames v1 classes=<C> dim=<F>'");
  const int class_count = parse_int(head[2].substr(8), line_ref(path, 1) + " classes");
  const int dim = parse_int(head[3].substr(4), line_ref(path, 1) + " dim");
  if (class_count < 1) throw ParseError(line_ref(path, 1) + ": classes must be >= 1");
  if (dim < 1) throw ParseError(line_ref(path, 1) + ": dim must be >= 1");

  struct ClipBuilder {
    std::string id;
    int label = 0;
    std::vector<std::pair<int, Vector>> rows;
    std::unordered_set<int> seen;
  };
  std::vector<ClipBuilder> builders;
  std::unordered_map<std::string, std::size_t> index;

  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty()) {
      if (in.peek() == std::ifstream::traits_type::eof()) break;
      throw ParseError(line_ref(path, line_no) + ": empty line");
    }
    auto fields = split_fields(line);
    if (fields.size() < 3)
      throw ParseError(line_ref(path, line_no) + ": expected at least 3 fields");
    const int feat = static_cast<int>(fields.size()) - 3;
    if (feat != dim)
      throw InconsistentDimError(line_ref(path, line_no) + ": row has " + std::to_string(feat) +
                                 " features, header declares " + std::to_string(dim));
    const std::string& id = fields[0];
    if (id.empty()) throw ParseError(line_ref(path, line_no) + ": empty clip_id");
    const int frame_idx = parse_int(fields[1], line_ref(path, line_no) + " frame_idx");
    if (frame_idx < 0) throw ParseError(line_ref(path, line_no) + ": negative frame_idx");
    const int label = parse_int(fields[2], line_ref(path, line_no) + " label");
    if (label < 0 || label >= class_count)
      throw UnknownLabelError(line_ref(path, line_no) + ": label " + std::to_string(label) +
                              " outside [0, " + std::to_string(class_count) + ")");
    Vector feats(dim);
    for (int k = 0; k < dim; ++k)
      feats(k) = parse_double(fields[static_cast<std::size_t>(3 + k)],
                              line_ref(path, line_no) + " feature " + std::to_string(k));

    auto [it, inserted] = index.try_emplace(id, builders.size());
    if (inserted) builders.push_back({id, label, {}, {}});
    ClipBuilder& b = builders[it->second];
    if (!inserted && b.label != label)
      throw ParseError(line_ref(path, line_no) + ": clip '" + id + "' label changed from " +
                       std::to_string(b.label) + " to " + std::to_string(label));
    if (!b.seen.insert(frame_idx).second)
      throw ParseError(line_ref(path, line_no) + ": clip '" + id + "' duplicate frame_idx " +
                       std::to_string(frame_idx));
    b.rows.emplace_back(frame_idx, std::move(feats));
  }
  if (builders.empty()) throw ParseError(path + ": no data rows");

  Dataset ds;
  ds.class_count = class_count;
  ds.clips.reserve(builders.size());
  for (auto& b : builders) {
    const int t_count = static_cast<int>(b.rows.size());
    for (const auto& row : b.rows) {
      if (row.first >= t_count)
        throw ParseError(path + ": clip '" + b.id + "' frame indices not contiguous (index " +
                         std::to_string(row.first) + " with " + std::to_string(t_count) +
                         " rows)");
    }
    std::sort(b.rows.begin(), b.rows.end(),
              [](const auto& a, const auto& c) { return a.first < c.first; });
    Matrix frames(t_count, dim);
    for (int t = 0; t < t_count; ++t)
      frames.row(t) = b.rows[static_cast<std::size_t>(t)].second.transpose();
    ds.clips.push_back({b.id, std::move(frames), b.label});
  }
  ds.validate();
  return ds;
}

void save_frames_csv(const Dataset& dataset, const std::string& path) {
  dataset.validate();
  for (const auto& clip : dataset.clips)
    if (clip.clip_id.find_first_of(", \t") != std::string::npos)
      throw InvalidSpecError("save_frames_csv: clip_id '" + clip.clip_id +
                             "' contains a delimiter");
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "#confit-frames v1 classes=" << dataset.class_count << " dim=" << dataset.feature_dim()
      << "\n";
  char buf[40];
  for (const auto& clip : dataset.clips) {
    for (Eigen::Index t = 0; t < clip.frames.rows(); ++t) {
      out << clip.clip_id << ',' << t << ',' << clip.label;
      for (Eigen::Index k = 0; k < clip.frames.cols(); ++k) {
        std::snprintf(buf, sizeof(buf), "%.17g", clip.frames(t, k));
        out << ',' << buf;
      }
      out << '\n';
    }
  }
  if (!out) throw IoError("write failed for " + path);
}

std::pair<Dataset, Dataset> generate_clusters(const SynthSpec& spec, Rng& rng) {
  spec.validate();
  const int class_total = spec.class_count;
  const int per_class = spec.clips_per_class;
  const int frames_per_clip = spec.frame_count;
  const int dim = spec.feature_dim;
  const int noise_dims = spec.shared_noise_dims;

  Matrix means = gaussian_matrix(class_total, dim, rng);
  if (class_total >= 2) {
    double dist_sum = 0.0;
    int pairs = 0;
    for (int i = 0; i < class_total; ++i)
      for (int j = i + 1; j < class_total; ++j) {
        dist_sum += (means.row(i) - means.row(j)).norm();
        ++pairs;
      }
    const double mean_dist = dist_sum / pairs;
    means *= mean_dist > 0.0 ? spec.class_separation / mean_dist : 0.0;
  } else {
    means.setZero();
  }

  std::vector<FrameSequence> all;
  all.reserve(static_cast<std::size_t>(class_total) * static_cast<std::size_t>(per_class));
  char idbuf[32];
  for (int c = 0; c < class_total; ++c) {
    for (int j = 0; j < per_class; ++j) {
      Matrix frames = gaussian_matrix(frames_per_clip, dim, rng);
      frames.rowwise() += means.row(c);
      if (noise_dims > 0) {
        // One nuisance draw per clip: a strong clip-level feature with no
        // class information.
        Vector nuisance = gaussian_vector(noise_dims, rng);
        for (int t = 0; t < frames_per_clip; ++t)
          frames.row(t).head(noise_dims) = nuisance.transpose();
      }
      std::snprintf(idbuf, sizeof(idbuf), "c%03d_%04d", c, j);
      all.push_back({idbuf, std::move(frames), c});
    }
  }

  const int n_val = static_cast<int>(std::lround(0.2 * per_class));
  Dataset train;
  Dataset val;
  train.class_count = class_total;
  val.class_count = class_total;
  train.split = Split::kTrain;
  val.split = Split::kValidation;
  for (int c = 0; c < class_total; ++c) {
    std::vector<int> idx(static_cast<std::size_t>(per_class));
    for (int j = 0; j < per_class; ++j) idx[static_cast<std::size_t>(j)] = c * per_class + j;
    rng.shuffle(idx);
    std::vector<int> val_idx(idx.begin(), idx.begin() + n_val);
    std::vector<int> train_idx(idx.begin() + n_val, idx.end());
    std::sort(val_idx.begin(), val_idx.end());
    std::sort(train_idx.begin(), train_idx.end());
    for (int i : train_idx) train.clips.push_back(all[static_cast<std::size_t>(i)]);
    for (int i : val_idx) val.clips.push_back(all[static_cast<std::size_t>(i)]);
  }
  train.validate_train_split();
  if (!val.clips.empty()) val.validate();
  return {train, val};
}

StratifiedBatchSampler::StratifiedBatchSampler(const Dataset& dataset, int batch_classes,
                                               int per_class)
    : dataset_(&dataset), batch_classes_(batch_classes), per_class_(per_class) {
  if (batch_classes < 2) throw InvalidSpecError("sampler: batch_classes must be >= 2");
  if (per_class < 2) throw InvalidSpecError("sampler: per_class must be >= 2");
  dataset.validate();
  if (batch_classes > dataset.class_count)
    throw InfeasibleBatchError("sampler: batch_classes " + std::to_string(batch_classes) +
                               " exceeds class_count " + std::to_string(dataset.class_count));
  by_class_.assign(static_cast<std::size_t>(dataset.class_count), {});
  for (int i = 0; i < dataset.size(); ++i)
    by_class_[static_cast<std::size_t>(dataset.clips[static_cast<std::size_t>(i)].label)]
        .push_back(i);
  for (int c = 0; c < dataset.class_count; ++c) {
    const auto& pool = by_class_[static_cast<std::size_t>(c)];
    if (static_cast<int>(pool.size()) < per_class)
      throw InfeasibleBatchError("sampler: class " + std::to_string(c) + " has " +
                                 std::to_string(pool.size()) + " clips, need " +
                                 std::to_string(per_class));
  }
}

void StratifiedBatchSampler::start_epoch(Rng& rng) {
  std::vector<std::vector<int>> pools = by_class_;
  for (auto& pool : pools) rng.shuffle(pool);
  std::vector<std::size_t> used(pools.size(), 0);
  epoch_batches_.clear();
  cursor_ = 0;
  while (true) {
    std::vector<int> eligible;
    for (std::size_t c = 0; c < pools.size(); ++c)
      if (pools[c].size() - used[c] >= static_cast<std::size_t>(per_class_))
        eligible.push_back(static_cast<int>(c));
    if (static_cast<int>(eligible.size()) < batch_classes_) break;
    for (int t = 0; t < batch_classes_; ++t) {
      const int j = t + rng.uniform_int(static_cast<int>(eligible.size()) - t);
      std::swap(eligible[static_cast<std::size_t>(t)], eligible[static_cast<std::size_t>(j)]);
    }
    std::vector<int> batch;
    batch.reserve(static_cast<std::size_t>(batch_size()));
    for (int t = 0; t < batch_classes_; ++t) {
      const auto c = static_cast<std::size_t>(eligible[static_cast<std::size_t>(t)]);
      for (int k = 0; k < per_class_; ++k) batch.push_back(pools[c][used[c]++]);
    }
    epoch_batches_.push_back(std::move(batch));
  }
}

bool StratifiedBatchSampler::next(std::vector<int>& batch) {
  if (cursor_ >= epoch_batches_.size()) return false;
  batch = epoch_batches_[cursor_++];
  return true;
}

}  // namespace confit
