#pragma once

#include <cstdint>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "confit/dataio.hpp"
#include "confit/trainer.hpp"

namespace confit {

struct DataPaths {
  std::string train;
  std::string validation;
};

struct DiagnosticsOptions {
  int group_size = 3;
  int n_groups = 3;
};

struct CheckpointPaths {
  std::string encoder;  // empty when not configured
  std::string probe;
};

struct CompareSpec {
  std::vector<std::uint64_t> seeds;
};

// Parsed run configuration. Unknown keys anywhere in the document are errors.
// Relative paths are resolved against the config file's directory.
struct RunConfig {
  std::uint64_t seed = 0;
  std::optional<SynthSpec> synth;  // its seed mirrors the run seed
  std::optional<DataPaths> data;
  std::optional<TrainConfig> train;
  std::optional<GridSearchSpec> grid;
  DiagnosticsOptions diagnostics;
  CheckpointPaths checkpoints;
  std::optional<CompareSpec> compare;
  nlohmann::json raw;  // the document as parsed, hashed into manifests
};

RunConfig load_run_config(const std::string& path);
RunConfig parse_run_config(const nlohmann::json& doc, const std::string& base_dir);
void apply_seed_override(RunConfig& config, std::uint64_t seed);

}  // namespace confit
