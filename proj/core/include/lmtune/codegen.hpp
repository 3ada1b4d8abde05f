// Copyright 2026 The lmtune Authors
// SPDX-License-Identifier: Apache-2.0
//
// OpenCL C emission for the synthetic kernel template.
//
// The source text depends only on the template's structure (home pattern,
// stencil, operation counts); every geometry constant is a macro supplied
// through compile_defines (-D NAME=value), so one .cl file serves every launch
// configuration of a kernel.
//
// Buffer contract shared with the reference interpreter:
//   in   padded target array, row stride IN_W; logical element (0,0) lives at
//        (IN_ORIGIN_ROW, IN_ORIGIN_COL). IN_ORIGIN_COL is a whole number of
//        DRAM segments so padding does not change alignment.
//   in2  contextual array, row stride IN2_W.
//   out  OUT_H x OUT_W, one element per work unit.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lmtune/access_analysis.hpp"
#include "lmtune/device.hpp"
#include "lmtune/kernel_model.hpp"

namespace lmtune {

struct Define {
  std::string name;
  std::int64_t value = 0;

  friend bool operator==(const Define&, const Define&) = default;
};

struct KernelSource {
  Variant variant = Variant::kBaseline;
  std::string source_text;
  std::string entry_name;
  std::vector<Define> compile_defines;

  // "-D NAME=value" per binding, space separated.
  std::string build_options() const;
  std::int64_t define(const std::string& name) const;
};

// Cooperative copy schedule: row segments of one transaction each, dealt
// round-robin to the warps of the workgroup.
struct CopyPlan {
  std::int64_t segments = 0;
  std::int64_t segments_per_row = 0;
  std::int64_t warps = 0;
  std::int64_t lanes_per_warp = 0;
  std::int64_t max_segments_per_warp = 0;
};

std::int64_t copy_transaction_count(const Footprint& fp, const DeviceDescriptor& dev);
CopyPlan plan_copy(const Footprint& fp, const LaunchConfig& launch, const DeviceDescriptor& dev);

// Throws ValidationError for an invalid instance.
KernelSource emit_baseline(const KernelInstance& instance, const DeviceDescriptor& dev = {});

// Throws ValidationError, or OptimizationInfeasible when fp does not fit in
// local memory.
KernelSource emit_optimized(const KernelInstance& instance, const Footprint& fp,
                            const DeviceDescriptor& dev = {});

// "<pattern>_<n>x<m>_<stencil><r>_<variant>"
std::string kernel_file_stem(const TemplateParams& params, Variant variant);

// Writes <stem>.cl and the <stem>.defines manifest (one "-D NAME=value" per
// line) into `dir`. Returns the .cl path.
std::filesystem::path write_kernel_source(const std::filesystem::path& dir,
                                          const TemplateParams& params,
                                          const KernelSource& source);

}  // namespace lmtune
