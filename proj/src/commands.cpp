#include "confit/commands.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <utility>
#include <vector>

#include "confit/artifacts.hpp"
#include "confit/diagnostics.hpp"
#include "confit/errors.hpp"
#include "confit/trainer.hpp"

namespace confit {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string join_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

void write_manifest(const std::string& command, const RunConfig& cfg,
                    const std::string& out_dir, const std::vector<std::string>& artifacts,
                    double wall_seconds) {
  nlohmann::json manifest;
  manifest["command"] = command;
  manifest["config"] = cfg.raw;
  manifest["config_hash"] = hash_hex(cfg.raw.dump());
  manifest["seed"] = cfg.seed;
  manifest["artifacts"] = artifacts;
  manifest["wall_clock_seconds"] = wall_seconds;
  write_json_file(manifest, join_path(out_dir, "manifest.json"));
}

void ensure_out_dir(const std::string& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) {
    throw IoError("cannot create output directory " + out_dir + ": " + ec.message());
  }
}

// Fixed files win over generation; synthesis falls back to the run seed
// stream so a bare seed fully determines the data.
std::pair<Dataset, Dataset> load_or_generate(const RunConfig& cfg, const std::string& command) {
  if (cfg.data) {
    Dataset train = load_frames_csv(cfg.data->train);
    Dataset val = load_frames_csv(cfg.data->validation);
    train.split = Split::kTrain;
    val.split = Split::kValidation;
    if (train.class_count != val.class_count) {
      throw InvalidSpecError("train and validation class counts differ (" +
                             std::to_string(train.class_count) + " vs " +
                             std::to_string(val.class_count) + ")");
    }
    if (train.feature_dim() != val.feature_dim()) {
      throw InvalidSpecError("train and validation feature dims differ");
    }
    return {std::move(train), std::move(val)};
  }
  if (cfg.synth) {
    Rng rng(cfg.synth->seed);
    return generate_clusters(*cfg.synth, rng);
  }
  throw ConfigError(command + " requires either a 'synth' or a 'data' section");
}

TrainConfig train_config_or_default(const RunConfig& cfg) {
  return cfg.train ? *cfg.train : TrainConfig{};
}

GridSearchSpec grid_or_default(const RunConfig& cfg) {
  return cfg.grid ? *cfg.grid : GridSearchSpec{};
}

EncoderParams load_encoder_for(const RunConfig& cfg, const std::string& command) {
  if (cfg.checkpoints.encoder.empty()) {
    throw ConfigError(command + " requires checkpoints.encoder");
  }
  return load_encoder_checkpoint(cfg.checkpoints.encoder);
}

// A train section given alongside a loaded checkpoint must describe the same
// architecture, otherwise the run would silently mix incompatible shapes.
void check_architecture(const EncoderParams& encoder, const TrainConfig& train) {
  std::vector<int> hidden;
  for (std::size_t l = 0; l + 1 < encoder.layers.size(); ++l) {
    hidden.push_back(static_cast<int>(encoder.layers[l].weight.rows()));
  }
  if (encoder.output_dim() != train.embed_dim || hidden != train.encoder_hidden) {
    throw ArchitectureMismatchError("checkpoint encoder (hidden " + [&] {
      std::string s = "[";
      for (std::size_t i = 0; i < hidden.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(hidden[i]);
      }
      return s + "], embed " + std::to_string(encoder.output_dim()) + ")";
    }() + " does not match the train section");
  }
}

nlohmann::json cell_to_json(const GridCellResult& cell) {
  return {{"learning_rate", cell.learning_rate},
          {"batch_size", cell.batch_size},
          {"val_accuracy", cell.val_accuracy}};
}

nlohmann::json curve_to_json(const TrainingTrace& trace) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& e : trace.epochs) {
    if (e.val_accuracy) {
      arr.push_back(*e.val_accuracy);
    } else {
      arr.push_back(nullptr);
    }
  }
  return arr;
}

double mean_of(const std::vector<double>& xs) {
  double sum = 0.0;
  for (double x : xs) sum += x;
  return xs.empty() ? 0.0 : sum / static_cast<double>(xs.size());
}

double sample_std(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean_of(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

Matrix dataset_embeddings(const EncoderParams& encoder, const Dataset& dataset) {
  Matrix out(dataset.size(), encoder.output_dim());
  for (int i = 0; i < dataset.size(); ++i) {
    out.row(i) = encode(encoder, dataset.clips[i]).representation.transpose();
  }
  return out;
}

// Representation metrics shared by both arms of a comparison run.
struct ArmMetrics {
  std::vector<double> accuracy;
  nlohmann::json curves = nlohmann::json::array();
  std::vector<double> anisotropy_values;
  std::vector<double> dims_to_share_90;
  std::vector<double> gap_values;
};

void record_representation(ArmMetrics& arm, const EncoderParams& encoder, const Dataset& val) {
  const Matrix emb = dataset_embeddings(encoder, val);
  arm.anisotropy_values.push_back(anisotropy(emb));
  const Matrix means = class_mean_embeddings(encoder, val);
  arm.dims_to_share_90.push_back(static_cast<double>(dim_contribution(means).dims_to_share[2]));
  arm.gap_values.push_back(within_between_gap(emb, val.labels()));
}

nlohmann::json arm_to_json(const ArmMetrics& arm) {
  return {{"accuracy", arm.accuracy},
          {"accuracy_mean", mean_of(arm.accuracy)},
          {"accuracy_std", sample_std(arm.accuracy)},
          {"curves", arm.curves},
          {"anisotropy", arm.anisotropy_values},
          {"dims_to_share_90", arm.dims_to_share_90},
          {"within_between_gap", arm.gap_values}};
}

}  // namespace

void run_synth(const RunConfig& cfg, const std::string& out_dir) {
  const auto start = Clock::now();
  if (!cfg.synth) {
    throw ConfigError("synth requires a 'synth' section");
  }
  ensure_out_dir(out_dir);
  Rng rng(cfg.synth->seed);
  const auto [train, val] = generate_clusters(*cfg.synth, rng);
  save_frames_csv(train, join_path(out_dir, "train.csv"));
  save_frames_csv(val, join_path(out_dir, "validation.csv"));
  write_manifest("synth", cfg, out_dir, {"train.csv", "validation.csv"}, seconds_since(start));
}

void run_pairtune(const RunConfig& cfg, const std::string& out_dir) {
  const auto start = Clock::now();
  const auto [train, val] = load_or_generate(cfg, "pairtune");
  const TrainConfig tcfg = train_config_or_default(cfg);
  ensure_out_dir(out_dir);
  Rng rng(cfg.seed);
  const PairTuneResult result = pairtune(train, val, tcfg, rng);
  save_encoder_checkpoint(result.encoder, join_path(out_dir, "encoder.ckpt"));
  save_trace_csv(result.trace, join_path(out_dir, "trace.csv"));
  write_manifest("pairtune", cfg, out_dir, {"encoder.ckpt", "trace.csv"}, seconds_since(start));
}

void run_probe(const RunConfig& cfg, const std::string& out_dir) {
  const auto start = Clock::now();
  const EncoderParams encoder = load_encoder_for(cfg, "probe");
  if (cfg.train) {
    check_architecture(encoder, *cfg.train);
  }
  const auto [train, val] = load_or_generate(cfg, "probe");
  const GridSearchSpec grid = grid_or_default(cfg);
  ensure_out_dir(out_dir);
  Rng rng(cfg.seed);
  const ProbeResult result = linear_probe(encoder, train, val, grid, rng);
  save_probe_checkpoint(result.probe, join_path(out_dir, "probe.ckpt"));
  nlohmann::json grid_doc;
  grid_doc["best"] = cell_to_json(result.best);
  grid_doc["cells"] = nlohmann::json::array();
  for (const auto& cell : result.cells) {
    grid_doc["cells"].push_back(cell_to_json(cell));
  }
  write_json_file(grid_doc, join_path(out_dir, "grid.json"));
  write_manifest("probe", cfg, out_dir, {"probe.ckpt", "grid.json"}, seconds_since(start));
}

void run_finetune(const RunConfig& cfg, const std::string& out_dir) {
  const auto start = Clock::now();
  const auto [train, val] = load_or_generate(cfg, "finetune");
  const TrainConfig tcfg = train_config_or_default(cfg);
  ensure_out_dir(out_dir);
  Rng rng(cfg.seed);
  const FineTuneResult result = finetune_baseline(train, val, tcfg, rng);
  save_encoder_checkpoint(result.encoder, join_path(out_dir, "encoder.ckpt"));
  save_probe_checkpoint(result.head, join_path(out_dir, "probe.ckpt"));
  save_trace_csv(result.trace, join_path(out_dir, "trace.csv"));
  write_manifest("finetune", cfg, out_dir, {"encoder.ckpt", "probe.ckpt", "trace.csv"},
                 seconds_since(start));
}

void run_diagnose(const RunConfig& cfg, const std::string& out_dir) {
  const auto start = Clock::now();
  const EncoderParams encoder = load_encoder_for(cfg, "diagnose");
  if (cfg.checkpoints.probe.empty()) {
    throw ConfigError("diagnose requires checkpoints.probe");
  }
  const LinearProbe probe = load_probe_checkpoint(cfg.checkpoints.probe);
  const auto [train, val] = load_or_generate(cfg, "diagnose");
  (void)train;  // diagnostics run on held-out clips only
  ensure_out_dir(out_dir);
  const Evaluation eval = evaluate(encoder, probe, val);
  const DiagnosticsReport report = run_diagnostics(encoder, val, eval.confusion,
                                                   cfg.diagnostics.group_size,
                                                   cfg.diagnostics.n_groups);
  nlohmann::json doc = report_to_json(report);
  doc["accuracy"] = eval.accuracy;
  write_json_file(doc, join_path(out_dir, "report.json"));
  write_projection_csv(val, report.projection_2d, join_path(out_dir, "projection_2d.csv"));
  write_manifest("diagnose", cfg, out_dir, {"report.json", "projection_2d.csv"},
                 seconds_since(start));
}

void run_compare(const RunConfig& cfg, const std::string& out_dir) {
  const auto start = Clock::now();
  if (!cfg.compare) {
    throw ConfigError("compare requires a 'compare' section");
  }
  const TrainConfig tcfg = train_config_or_default(cfg);
  const GridSearchSpec grid = grid_or_default(cfg);
  ensure_out_dir(out_dir);

  ArmMetrics pair_arm;
  ArmMetrics fine_arm;
  for (const std::uint64_t seed : cfg.compare->seeds) {
    Dataset train;
    Dataset val;
    if (cfg.data) {
      std::tie(train, val) = load_or_generate(cfg, "compare");
    } else if (cfg.synth) {
      SynthSpec spec = *cfg.synth;
      spec.seed = seed;
      Rng data_rng(spec.seed);
      std::tie(train, val) = generate_clusters(spec, data_rng);
    } else {
      throw ConfigError("compare requires either a 'synth' or a 'data' section");
    }

    // Both arms start from the same rng stream, so their initial encoders are
    // bitwise identical and the comparison isolates the training objective.
    Rng pair_rng(seed);
    const PairTuneResult pt = pairtune(train, val, tcfg, pair_rng);
    const ProbeResult pr = linear_probe(pt.encoder, train, val, grid, pair_rng);
    pair_arm.accuracy.push_back(pr.best.val_accuracy);
    pair_arm.curves.push_back(curve_to_json(pt.trace));
    record_representation(pair_arm, pt.encoder, val);

    Rng fine_rng(seed);
    const FineTuneResult ft = finetune_baseline(train, val, tcfg, fine_rng);
    fine_arm.accuracy.push_back(evaluate(ft.encoder, ft.head, val).accuracy);
    fine_arm.curves.push_back(curve_to_json(ft.trace));
    record_representation(fine_arm, ft.encoder, val);
  }

  nlohmann::json doc;
  doc["seeds"] = cfg.compare->seeds;
  doc["pairtune"] = arm_to_json(pair_arm);
  doc["finetune"] = arm_to_json(fine_arm);
  doc["accuracy_gap_mean"] = mean_of(pair_arm.accuracy) - mean_of(fine_arm.accuracy);
  write_json_file(doc, join_path(out_dir, "comparison.json"));
  write_manifest("compare", cfg, out_dir, {"comparison.json"}, seconds_since(start));
}

void run_command(const std::string& name, const RunConfig& cfg, const std::string& out_dir) {
  if (name == "synth") {
    run_synth(cfg, out_dir);
  } else if (name == "pairtune") {
    run_pairtune(cfg, out_dir);
  } else if (name == "probe") {
    run_probe(cfg, out_dir);
  } else if (name == "finetune") {
    run_finetune(cfg, out_dir);
  } else if (name == "diagnose") {
    run_diagnose(cfg, out_dir);
  } else if (name == "compare") {
    run_compare(cfg, out_dir);
  } else {
    throw ConfigError("unknown command '" + name + "'");
  }
}

}  // namespace confit
