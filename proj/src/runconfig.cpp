#include "confit/runconfig.hpp"

#include <filesystem>
#include <set>

#include "confit/artifacts.hpp"
#include "confit/errors.hpp"
#include "confit/supcon.hpp"

namespace confit {

namespace {

void check_keys(const nlohmann::json& obj, const std::string& where,
                const std::set<std::string>& allowed) {
  if (!obj.is_object()) {
    throw ConfigError(where + " must be a JSON object");
  }
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (allowed.count(it.key()) == 0) {
      throw ConfigError("unknown key '" + it.key() + "' in " + where);
    }
  }
}

template <typename T>
T get_number(const nlohmann::json& obj, const std::string& key, const std::string& where) {
  const auto& v = obj.at(key);
  if (!v.is_number()) {
    throw ConfigError(where + "." + key + " must be a number");
  }
  return v.get<T>();
}

int get_int(const nlohmann::json& obj, const std::string& key, const std::string& where) {
  const auto& v = obj.at(key);
  if (!v.is_number_integer()) {
    throw ConfigError(where + "." + key + " must be an integer");
  }
  return v.get<int>();
}

std::uint64_t get_u64(const nlohmann::json& obj, const std::string& key,
                      const std::string& where) {
  const auto& v = obj.at(key);
  if (!v.is_number_unsigned() && !v.is_number_integer()) {
    throw ConfigError(where + "." + key + " must be a non-negative integer");
  }
  if (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0) {
    throw ConfigError(where + "." + key + " must be a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

std::string get_string(const nlohmann::json& obj, const std::string& key,
                       const std::string& where) {
  const auto& v = obj.at(key);
  if (!v.is_string()) {
    throw ConfigError(where + "." + key + " must be a string");
  }
  return v.get<std::string>();
}

std::string resolve_path(const std::string& path, const std::string& base_dir) {
  std::filesystem::path p(path);
  if (p.is_absolute() || base_dir.empty()) {
    return path;
  }
  return (std::filesystem::path(base_dir) / p).lexically_normal().string();
}

SynthSpec parse_synth(const nlohmann::json& obj) {
  check_keys(obj, "synth",
             {"class_count", "clips_per_class", "frame_count", "feature_dim",
              "class_separation", "shared_noise_dims", "seed"});
  SynthSpec spec;
  if (obj.contains("class_count")) spec.class_count = get_int(obj, "class_count", "synth");
  if (obj.contains("clips_per_class"))
    spec.clips_per_class = get_int(obj, "clips_per_class", "synth");
  if (obj.contains("frame_count")) spec.frame_count = get_int(obj, "frame_count", "synth");
  if (obj.contains("feature_dim")) spec.feature_dim = get_int(obj, "feature_dim", "synth");
  if (obj.contains("class_separation"))
    spec.class_separation = get_number<double>(obj, "class_separation", "synth");
  if (obj.contains("shared_noise_dims"))
    spec.shared_noise_dims = get_int(obj, "shared_noise_dims", "synth");
  if (obj.contains("seed")) spec.seed = get_u64(obj, "seed", "synth");
  spec.validate();
  return spec;
}

DataPaths parse_data(const nlohmann::json& obj, const std::string& base_dir) {
  check_keys(obj, "data", {"train", "validation"});
  if (!obj.contains("train") || !obj.contains("validation")) {
    throw ConfigError("data requires both 'train' and 'validation' paths");
  }
  DataPaths paths;
  paths.train = resolve_path(get_string(obj, "train", "data"), base_dir);
  paths.validation = resolve_path(get_string(obj, "validation", "data"), base_dir);
  return paths;
}

SupConConfig parse_supcon(const nlohmann::json& obj) {
  check_keys(obj, "train.supcon",
             {"temperature", "mining", "hard_positives", "hard_negatives"});
  SupConConfig cfg;
  if (obj.contains("temperature"))
    cfg.temperature = get_number<double>(obj, "temperature", "train.supcon");
  if (obj.contains("mining")) {
    const std::string mode = get_string(obj, "mining", "train.supcon");
    if (mode == "none") {
      cfg.mining = Mining::kNone;
    } else if (mode == "hard") {
      cfg.mining = Mining::kHard;
    } else {
      throw ConfigError("train.supcon.mining must be \"none\" or \"hard\", got \"" + mode +
                        "\"");
    }
  }
  if (obj.contains("hard_positives"))
    cfg.hard_positives = get_int(obj, "hard_positives", "train.supcon");
  if (obj.contains("hard_negatives"))
    cfg.hard_negatives = get_int(obj, "hard_negatives", "train.supcon");
  cfg.validate();
  return cfg;
}

TrainConfig parse_train(const nlohmann::json& obj) {
  check_keys(obj, "train",
             {"epochs", "learning_rate", "batch_classes", "per_class", "eval_every",
              "supcon", "encoder_hidden", "embed_dim", "projection_dim",
              "projector_hidden"});
  TrainConfig cfg;
  if (obj.contains("epochs")) cfg.epochs = get_int(obj, "epochs", "train");
  if (obj.contains("learning_rate"))
    cfg.learning_rate = get_number<double>(obj, "learning_rate", "train");
  if (obj.contains("batch_classes")) cfg.batch_classes = get_int(obj, "batch_classes", "train");
  if (obj.contains("per_class")) cfg.per_class = get_int(obj, "per_class", "train");
  if (obj.contains("eval_every")) cfg.eval_every = get_int(obj, "eval_every", "train");
  if (obj.contains("supcon")) cfg.supcon = parse_supcon(obj.at("supcon"));
  if (obj.contains("encoder_hidden")) {
    const auto& arr = obj.at("encoder_hidden");
    if (!arr.is_array()) {
      throw ConfigError("train.encoder_hidden must be an array of integers");
    }
    cfg.encoder_hidden.clear();
    for (const auto& v : arr) {
      if (!v.is_number_integer()) {
        throw ConfigError("train.encoder_hidden must be an array of integers");
      }
      cfg.encoder_hidden.push_back(v.get<int>());
    }
  }
  if (obj.contains("embed_dim")) cfg.embed_dim = get_int(obj, "embed_dim", "train");
  if (obj.contains("projection_dim"))
    cfg.projection_dim = get_int(obj, "projection_dim", "train");
  if (obj.contains("projector_hidden"))
    cfg.projector_hidden = get_int(obj, "projector_hidden", "train");
  cfg.validate();
  return cfg;
}

GridSearchSpec parse_grid(const nlohmann::json& obj) {
  check_keys(obj, "grid", {"learning_rates", "batch_sizes", "probe_epochs"});
  GridSearchSpec spec;
  if (obj.contains("learning_rates")) {
    const auto& arr = obj.at("learning_rates");
    if (!arr.is_array()) {
      throw ConfigError("grid.learning_rates must be an array of numbers");
    }
    spec.learning_rates.clear();
    for (const auto& v : arr) {
      if (!v.is_number()) {
        throw ConfigError("grid.learning_rates must be an array of numbers");
      }
      spec.learning_rates.push_back(v.get<double>());
    }
  }
  if (obj.contains("batch_sizes")) {
    const auto& arr = obj.at("batch_sizes");
    if (!arr.is_array()) {
      throw ConfigError("grid.batch_sizes must be an array of integers");
    }
    spec.batch_sizes.clear();
    for (const auto& v : arr) {
      if (!v.is_number_integer()) {
        throw ConfigError("grid.batch_sizes must be an array of integers");
      }
      spec.batch_sizes.push_back(v.get<int>());
    }
  }
  if (obj.contains("probe_epochs")) spec.probe_epochs = get_int(obj, "probe_epochs", "grid");
  spec.validate();
  return spec;
}

DiagnosticsOptions parse_diagnostics(const nlohmann::json& obj) {
  check_keys(obj, "diagnostics", {"group_size", "n_groups"});
  DiagnosticsOptions opts;
  if (obj.contains("group_size")) opts.group_size = get_int(obj, "group_size", "diagnostics");
  if (obj.contains("n_groups")) opts.n_groups = get_int(obj, "n_groups", "diagnostics");
  if (opts.group_size < 2) {
    throw ConfigError("diagnostics.group_size must be at least 2");
  }
  if (opts.n_groups < 1) {
    throw ConfigError("diagnostics.n_groups must be at least 1");
  }
  return opts;
}

CheckpointPaths parse_checkpoints(const nlohmann::json& obj, const std::string& base_dir) {
  check_keys(obj, "checkpoints", {"encoder", "probe"});
  CheckpointPaths paths;
  if (obj.contains("encoder")) {
    paths.encoder = resolve_path(get_string(obj, "encoder", "checkpoints"), base_dir);
  }
  if (obj.contains("probe")) {
    paths.probe = resolve_path(get_string(obj, "probe", "checkpoints"), base_dir);
  }
  return paths;
}

CompareSpec parse_compare(const nlohmann::json& obj) {
  check_keys(obj, "compare", {"seeds"});
  if (!obj.contains("seeds")) {
    throw ConfigError("compare requires a 'seeds' array");
  }
  const auto& arr = obj.at("seeds");
  if (!arr.is_array() || arr.empty()) {
    throw ConfigError("compare.seeds must be a non-empty array of integers");
  }
  CompareSpec spec;
  for (const auto& v : arr) {
    if (!v.is_number_unsigned() && !v.is_number_integer()) {
      throw ConfigError("compare.seeds must be a non-empty array of integers");
    }
    if (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0) {
      throw ConfigError("compare.seeds entries must be non-negative");
    }
    spec.seeds.push_back(v.get<std::uint64_t>());
  }
  return spec;
}

}  // namespace

RunConfig parse_run_config(const nlohmann::json& doc, const std::string& base_dir) {
  check_keys(doc, "config",
             {"seed", "synth", "data", "train", "grid", "diagnostics", "checkpoints",
              "compare"});
  RunConfig cfg;
  cfg.raw = doc;
  if (doc.contains("seed")) cfg.seed = get_u64(doc, "seed", "config");
  if (doc.contains("synth")) cfg.synth = parse_synth(doc.at("synth"));
  if (doc.contains("data")) cfg.data = parse_data(doc.at("data"), base_dir);
  if (doc.contains("train")) cfg.train = parse_train(doc.at("train"));
  if (doc.contains("grid")) cfg.grid = parse_grid(doc.at("grid"));
  if (doc.contains("diagnostics")) cfg.diagnostics = parse_diagnostics(doc.at("diagnostics"));
  if (doc.contains("checkpoints"))
    cfg.checkpoints = parse_checkpoints(doc.at("checkpoints"), base_dir);
  if (doc.contains("compare")) cfg.compare = parse_compare(doc.at("compare"));
  // The synth stream follows the run seed unless the config pins one explicitly.
  if (cfg.synth && !doc.at("synth").contains("seed")) {
    cfg.synth->seed = cfg.seed;
  }
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  const nlohmann::json doc = read_json_file(path);
  const std::string base_dir = std::filesystem::path(path).parent_path().string();
  return parse_run_config(doc, base_dir);
}

void apply_seed_override(RunConfig& config, std::uint64_t seed) {
  config.seed = seed;
  config.raw["seed"] = seed;
  // A synth seed written in the config stays pinned; the mirror rule only
  // applies when the config left it implicit.
  const bool pinned =
      config.raw.contains("synth") && config.raw["synth"].contains("seed");
  if (config.synth && !pinned) {
    config.synth->seed = seed;
  }
}

}  // namespace confit
