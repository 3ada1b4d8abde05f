// Copyright 2026 The lmtune Authors
// SPDX-License-Identifier: Apache-2.0
//
// Synthetic dataset generation: compile-time tuples, pattern/N/M expansion,
// launch-configuration sweep, cost-model labeling and CSV persistence.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lmtune/access_analysis.hpp"
#include "lmtune/device.hpp"
#include "lmtune/kernel_model.hpp"

namespace lmtune {

struct IntRange {
  int lo = 0;
  int hi = 0;
  // Target mean under SamplingMode::kMatchedMean; ignored otherwise.
  double mean = 0.0;
};

enum class SamplingMode {
  kUniform,      // every value in a range equally likely
  kMatchedMean,  // skewed draw whose expectation equals IntRange::mean
};

struct SamplingSpec {
  int num_tuples = 100;
  std::vector<std::int64_t> large_trip_counts = {8, 16, 32, 64};
  std::vector<std::int64_t> small_trip_counts = {1, 2, 4, 8};
  IntRange radius{0, 2, 1.0};
  IntRange comp_ilb{5, 44, 19.0};
  IntRange comp_ep{1, 48, 23.0};
  IntRange coal_ilb{0, 13, 3.0};
  IntRange coal_ep{0, 13, 5.0};
  IntRange uncoal_ilb{0, 4, 0.8};
  IntRange uncoal_ep{0, 4, 0.8};
  SamplingMode mode = SamplingMode::kUniform;
  std::int64_t in_h = 2048;
  std::int64_t in_w = 2048;
  std::int64_t out_h = 2048;
  std::int64_t out_w = 2048;
  std::int64_t max_wg_size = 1024;
  std::int64_t min_grid_size = 512;
  std::int64_t max_instances = 50000;
  std::uint64_t seed = 1;
};

std::vector<std::string> validate_sampling(const SamplingSpec& spec);

// Per-value probabilities of a range draw (index 0 is range.lo).
std::vector<double> value_distribution(const IntRange& range, SamplingMode mode);

// num_tuples parameter sets with pattern, n and m left at their defaults.
std::vector<TemplateParams> sample_compile_tuples(const SamplingSpec& spec);

// 7 patterns x 4 N x 4 M expansions of one tuple.
std::vector<TemplateParams> expand_patterns(const TemplateParams& tuple, const SamplingSpec& spec);

// Every valid launch configuration for `params`, ordered by (grid_y, grid_x,
// wg_y, wg_x).
std::vector<LaunchConfig> enumerate_launch_configs(const TemplateParams& params,
                                                   const SamplingSpec& spec);

// Distinct kernels (tuples expanded, duplicates removed), in generation order.
std::vector<TemplateParams> enumerate_kernels(const SamplingSpec& spec);

// Instances selected for labeling: an even share of max_instances per kernel,
// with the remainder dealt one per kernel in pattern round-robin order. Each
// kernel's share is a seeded subsample of its launch configurations.
std::vector<KernelInstance> select_instances(const std::vector<TemplateParams>& kernels,
                                             const SamplingSpec& spec);

struct LabeledInstance {
  KernelInstance instance;
  FeatureVector features;
  double speedup = 0.0;
  bool beneficial = false;

  friend bool operator==(const LabeledInstance&, const LabeledInstance&) = default;
};

LabeledInstance label_instance(const KernelInstance& instance, const DeviceDescriptor& dev);

struct SkipRecord {
  std::string key;
  std::string reason;
};

struct Dataset {
  std::vector<LabeledInstance> rows;  // sorted by instance_key
  std::vector<SkipRecord> skipped;
  std::size_t num_kernels = 0;
};

// Labels select_instances(enumerate_kernels(spec)) on `threads` workers
// (0 = hardware concurrency). The result does not depend on `threads`.
Dataset build_dataset(const SamplingSpec& spec, const DeviceDescriptor& dev, int threads = 0);
Dataset label_instances(const std::vector<KernelInstance>& instances, const DeviceDescriptor& dev,
                        int threads = 0);

// Column names: instance key columns, the 18 features, speedup, beneficial.
const std::vector<std::string>& csv_header();

void write_rows(const std::filesystem::path& path, const std::vector<LabeledInstance>& rows);
// Throws ParseError naming the line for malformed content.
std::vector<LabeledInstance> read_rows(const std::filesystem::path& path);
std::string format_rows(const std::vector<LabeledInstance>& rows);
std::vector<LabeledInstance> parse_rows(const std::string& text);

void write_skip_log(const std::filesystem::path& path, const std::vector<SkipRecord>& skipped);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Seeded shuffle; the first round(train_fraction * n) indices train. Both
// parts are returned in ascending order.
Split split_rows(std::size_t n, double train_fraction, std::uint64_t seed);

// 64-bit mixing of a seed with a stream index.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace lmtune
