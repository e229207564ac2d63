#pragma once

#include <json.hpp>
#include <string>

#include "confit/diagnostics.hpp"
#include "confit/encoder.hpp"
#include "confit/trainer.hpp"

namespace confit {

// Checkpoints are versioned JSON documents with row-major weights; values
// round-trip exactly for finite doubles.
void save_encoder_checkpoint(const EncoderParams& params, const std::string& path);
EncoderParams load_encoder_checkpoint(const std::string& path);
void save_probe_checkpoint(const LinearProbe& probe, const std::string& path);
LinearProbe load_probe_checkpoint(const std::string& path);

nlohmann::json report_to_json(const DiagnosticsReport& report);

void write_json_file(const nlohmann::json& doc, const std::string& path);
nlohmann::json read_json_file(const std::string& path);

// FNV-1a 64-bit over the canonical dump, as a 16-digit hex string.
std::string hash_hex(const std::string& text);

}  // namespace confit
