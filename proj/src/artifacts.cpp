#include "confit/artifacts.hpp"

#include <cstdio>
#include <fstream>

namespace confit {

namespace {

using nlohmann::json;

json flat_row_major(const Matrix& m) {
  json arr = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) arr.push_back(m(r, c));
  return arr;
}

json vector_to_json(const Vector& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

const json& require_field(const json& doc, const char* key, const std::string& ctx) {
  if (!doc.contains(key)) throw ParseError(ctx + ": missing field '" + key + "'");
  return doc.at(key);
}

Matrix matrix_from_flat(const json& arr, Eigen::Index rows, Eigen::Index cols,
                        const std::string& ctx) {
  if (!arr.is_array() || static_cast<Eigen::Index>(arr.size()) != rows * cols)
    throw ParseError(ctx + ": expected " + std::to_string(rows * cols) + " values");
  Matrix m(rows, cols);
  Eigen::Index at = 0;
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) {
      const json& v = arr.at(static_cast<std::size_t>(at++));
      if (!v.is_number()) throw ParseError(ctx + ": non-numeric weight");
      m(r, c) = v.get<double>();
    }
  return m;
}

Vector vector_from_json(const json& arr, Eigen::Index size, const std::string& ctx) {
  if (!arr.is_array() || static_cast<Eigen::Index>(arr.size()) != size)
    throw ParseError(ctx + ": expected " + std::to_string(size) + " values");
  Vector v(size);
  for (Eigen::Index i = 0; i < size; ++i) {
    const json& e = arr.at(static_cast<std::size_t>(i));
    if (!e.is_number()) throw ParseError(ctx + ": non-numeric value");
    v(i) = e.get<double>();
  }
  return v;
}

json checkpoint_shell(const char* kind) {
  json doc;
  doc["format"] = "confit-checkpoint";
  doc["version"] = 1;
  doc["kind"] = kind;
  return doc;
}

json load_checkpoint_shell(const std::string& path, const char* kind) {
  json doc = read_json_file(path);
  if (require_field(doc, "format", path).get<std::string>() != "confit-checkpoint")
    throw ParseError(path + ": not a confit checkpoint");
  if (require_field(doc, "version", path).get<int>() != 1)
    throw ParseError(path + ": unsupported checkpoint version");
  if (require_field(doc, "kind", path).get<std::string>() != kind)
    throw ParseError(path + ": checkpoint kind is '" +
                     doc.at("kind").get<std::string>() + "', expected '" + kind + "'");
  return doc;
}

void check_finite_layers(const std::vector<DenseLayer>& layers, const std::string& ctx) {
  for (const auto& layer : layers)
    if (!layer.weight.allFinite() || !layer.bias.allFinite())
      throw InvalidSpecError(ctx + ": non-finite parameter");
}

}  // namespace

void save_encoder_checkpoint(const EncoderParams& params, const std::string& path) {
  if (params.layers.empty()) throw InvalidSpecError("save_encoder_checkpoint: no layers");
  check_finite_layers(params.layers, "save_encoder_checkpoint");
  json doc = checkpoint_shell("encoder");
  doc["input_dim"] = params.input_dim();
  doc["output_dim"] = params.output_dim();
  json hidden = json::array();
  for (std::size_t l = 0; l + 1 < params.layers.size(); ++l)
    hidden.push_back(params.layers[l].weight.rows());
  doc["hidden"] = hidden;
  json layers = json::array();
  for (const auto& layer : params.layers) {
    json entry;
    entry["rows"] = layer.weight.rows();
    entry["cols"] = layer.weight.cols();
    entry["weight"] = flat_row_major(layer.weight);
    entry["bias"] = vector_to_json(layer.bias);
    layers.push_back(std::move(entry));
  }
  doc["layers"] = std::move(layers);
  write_json_file(doc, path);
}

EncoderParams load_encoder_checkpoint(const std::string& path) {
  const json doc = load_checkpoint_shell(path, "encoder");
  const json& layers = require_field(doc, "layers", path);
  if (!layers.is_array() || layers.empty()) throw ParseError(path + ": empty layer list");
  EncoderParams params;
  Eigen::Index prev = -1;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const json& entry = layers.at(l);
    const std::string ctx = path + " layer " + std::to_string(l);
    const auto rows = require_field(entry, "rows", ctx).get<Eigen::Index>();
    const auto cols = require_field(entry, "cols", ctx).get<Eigen::Index>();
    if (rows < 1 || cols < 1) throw ParseError(ctx + ": bad shape");
    if (prev >= 0 && cols != prev)
      throw ParseError(ctx + ": input dim " + std::to_string(cols) +
                       " does not chain from previous output " + std::to_string(prev));
    DenseLayer layer;
    layer.weight = matrix_from_flat(require_field(entry, "weight", ctx), rows, cols, ctx);
    layer.bias = vector_from_json(require_field(entry, "bias", ctx), rows, ctx);
    params.layers.push_back(std::move(layer));
    prev = rows;
  }
  if (require_field(doc, "input_dim", path).get<int>() != params.input_dim())
    throw ParseError(path + ": input_dim disagrees with layer shapes");
  if (require_field(doc, "output_dim", path).get<int>() != params.output_dim())
    throw ParseError(path + ": output_dim disagrees with layer shapes");
  check_finite_layers(params.layers, path);
  return params;
}

void save_probe_checkpoint(const LinearProbe& probe, const std::string& path) {
  if (probe.weight.rows() < 1 || probe.weight.cols() < 1)
    throw InvalidSpecError("save_probe_checkpoint: empty probe");
  if (probe.bias.size() != probe.weight.rows())
    throw DimensionMismatchError("save_probe_checkpoint: bias size vs weight rows");
  if (!probe.weight.allFinite() || !probe.bias.allFinite())
    throw InvalidSpecError("save_probe_checkpoint: non-finite parameter");
  json doc = checkpoint_shell("probe");
  doc["input_dim"] = probe.weight.cols();
  doc["class_count"] = probe.weight.rows();
  doc["weight"] = flat_row_major(probe.weight);
  doc["bias"] = vector_to_json(probe.bias);
  write_json_file(doc, path);
}

LinearProbe load_probe_checkpoint(const std::string& path) {
  const json doc = load_checkpoint_shell(path, "probe");
  const auto classes = require_field(doc, "class_count", path).get<Eigen::Index>();
  const auto dim = require_field(doc, "input_dim", path).get<Eigen::Index>();
  if (classes < 1 || dim < 1) throw ParseError(path + ": bad probe shape");
  LinearProbe probe;
  probe.weight = matrix_from_flat(require_field(doc, "weight", path), classes, dim, path);
  probe.bias = vector_from_json(require_field(doc, "bias", path), classes, path);
  if (!probe.weight.allFinite() || !probe.bias.allFinite())
    throw ParseError(path + ": non-finite parameter");
  return probe;
}

nlohmann::json report_to_json(const DiagnosticsReport& report) {
  json doc;
  doc["anisotropy"] = report.anisotropy_value;
  json profile;
  profile["values"] = vector_to_json(report.dim_profile.contributions);
  profile["ranked_dims"] = report.dim_profile.ranked_dims;
  profile["cumulative_share"] = vector_to_json(report.dim_profile.cumulative_share);
  profile["top_k_share"] = report.dim_profile.top_k_share;
  profile["dims_to_share"] = {{"50", report.dim_profile.dims_to_share[0]},
                              {"80", report.dim_profile.dims_to_share[1]},
                              {"90", report.dim_profile.dims_to_share[2]}};
  doc["dim_contribution"] = std::move(profile);
  json confusion = json::array();
  for (Eigen::Index r = 0; r < report.confusion.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < report.confusion.cols(); ++c)
      row.push_back(report.confusion(r, c));
    confusion.push_back(std::move(row));
  }
  doc["confusion"] = std::move(confusion);
  doc["difficult_groups"] = report.difficult_class_groups;
  doc["within_between_gap"] = report.separability_gap;
  doc["class_count"] = report.confusion.rows();
  doc["clip_count"] = report.projection_2d.rows();
  return doc;
}

void write_json_file(const nlohmann::json& doc, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << doc.dump(2) << '\n';
  if (!out) throw IoError("write failed for " + path);
}

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

std::string hash_hex(const std::string& text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace confit
