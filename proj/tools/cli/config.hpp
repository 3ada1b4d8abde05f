// Copyright 2026 The lmtune Authors
// SPDX-License-Identifier: Apache-2.0
//
// Run configuration for the lmtune tool. Settings come from, in increasing
// precedence: built-in defaults, a key=value config file, LMT_* environment
// variables, and command-line flags.

#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lmtune/dataset.hpp"
#include "lmtune/device.hpp"
#include "lmtune/errors.hpp"
#include "lmtune/forest.hpp"

namespace lmtune::cli {

class ConfigError : public Error {
 public:
  using Error::Error;
};

struct Paths {
  std::filesystem::path dataset = "lmtune_dataset.csv";
  std::filesystem::path skip_log;  // empty: <dataset>.skipped
  std::filesystem::path model = "lmtune_model.txt";
  std::filesystem::path report = "lmtune_report.kv";
  std::filesystem::path histogram = "lmtune_histogram.csv";
  std::filesystem::path kernels = "lmtune_kernels";

  std::filesystem::path effective_skip_log() const;
};

struct RunConfig {
  DeviceDescriptor device;
  SamplingSpec sampling;
  Hyperparams forest;
  double train_fraction = 0.10;
  Paths paths;
  int threads = 0;  // 0 = hardware concurrency
};

// Every recognised key, e.g. "device.warp_size", "forest.train_fraction".
std::vector<std::string> config_keys();

// Throws ConfigError naming the key for unknown keys or bad values.
void apply_setting(RunConfig& config, std::string_view key, std::string_view value);

// key=value lines; '#' starts a comment. Errors carry the line number.
void apply_config_text(RunConfig& config, const std::string& text);
void apply_config_file(RunConfig& config, const std::filesystem::path& path);

// "LMT_" + upper-cased key with '.' replaced by '_', e.g.
// LMT_SAMPLING_MAX_INSTANCES for sampling.max_instances.
std::string env_name(std::string_view key);
using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
void apply_environment(RunConfig& config, const EnvLookup& lookup);
std::optional<std::string> process_env(const std::string& name);

std::vector<std::string> validate_config(const RunConfig& config);

}  // namespace lmtune::cli
