#pragma once

#include <string>

#include "confit/runconfig.hpp"

namespace confit {

// Each command materializes its fixed-name artifacts under out_dir and writes
// manifest.json last, so a manifest implies the run completed. Errors throw;
// nothing is cleaned up on failure.
void run_synth(const RunConfig& config, const std::string& out_dir);
void run_pairtune(const RunConfig& config, const std::string& out_dir);
void run_probe(const RunConfig& config, const std::string& out_dir);
void run_finetune(const RunConfig& config, const std::string& out_dir);
void run_diagnose(const RunConfig& config, const std::string& out_dir);
void run_compare(const RunConfig& config, const std::string& out_dir);

// Dispatch by subcommand name; throws ConfigError for an unknown name.
void run_command(const std::string& name, const RunConfig& config, const std::string& out_dir);

}  // namespace confit
