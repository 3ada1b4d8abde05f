// Copyright 2026 The lmtune Authors
// SPDX-License-Identifier: Apache-2.0
//
// Static analysis of the target-array access: data reuse, warp coalescing,
// the cached region's footprint, and the 18-entry model feature vector.
//
// All per-workgroup quantities are evaluated for workgroup (0,0) at work-unit
// iteration (0,0); the home patterns are translation invariant across
// workgroups and iterations so any other choice gives the same values.

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lmtune/device.hpp"
#include "lmtune/kernel_model.hpp"

namespace lmtune {

enum class Feature : std::size_t {
  kReuseDegree,
  kLmemBytes,
  kNoncoalescingDegree,
  kNumTargetAccesses,
  kOffsetMinRow,
  kOffsetMaxRow,
  kOffsetMinCol,
  kOffsetMaxCol,
  kCompIlb,
  kCompEp,
  kCtxCoalIlb,
  kCtxUncoalIlb,
  kCtxCoalEp,
  kCtxUncoalEp,
  kRegsPerThread,
  kGridSize,
  kWgSize,
  kWusPerWorkitem,
};

inline constexpr std::size_t kNumFeatures = 18;

inline constexpr std::array<std::string_view, kNumFeatures> kFeatureNames = {
    "reuse_degree",   "lmem_bytes",     "noncoalescing_degree", "num_target_accesses",
    "offset_min_row", "offset_max_row", "offset_min_col",       "offset_max_col",
    "comp_ilb",       "comp_ep",        "ctx_coal_ilb",         "ctx_uncoal_ilb",
    "ctx_coal_ep",    "ctx_uncoal_ep",  "regs_per_thread",      "grid_size",
    "wg_size",        "wus_per_workitem",
};

struct FeatureVector {
  std::array<double, kNumFeatures> values{};

  double& operator[](Feature f) { return values[static_cast<std::size_t>(f)]; }
  double operator[](Feature f) const { return values[static_cast<std::size_t>(f)]; }

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

// Cached region of the target array for one workgroup.
struct Footprint {
  std::int64_t row_start = 0;  // first cached row (apron included)
  std::int64_t col_start = 0;  // first cached column, aligned down to a segment
  std::int64_t row_span = 0;
  std::int64_t col_span = 0;         // apron-extended width, before alignment
  std::int64_t padded_col_span = 0;  // whole segments from col_start
  std::int64_t bytes = 0;

  friend bool operator==(const Footprint&, const Footprint&) = default;
};

// Inclusive bounding box of home coordinates.
struct HomeBox {
  Coord min;
  Coord max;
};

// Lanes of one warp laid over the workgroup (x fastest): a lanes_x by lanes_y
// block of workitems. Every warp of a power-of-two workgroup has this shape.
struct WarpShape {
  std::int64_t lanes_x = 0;
  std::int64_t lanes_y = 0;
};

WarpShape warp_shape(const LaunchConfig& launch, const DeviceDescriptor& dev);

// Distinct transaction-aligned segments touched by one warp-wide access.
std::int64_t warp_transactions(std::span<const std::int64_t> byte_addresses,
                               const DeviceDescriptor& dev);

// Byte address of a logical target-array element (row-major, row stride in_w).
std::int64_t element_address(const TemplateParams& params, Coord element,
                             const DeviceDescriptor& dev);

// Average number of workitems of a workgroup touching each element the home
// access reads, weighted by access count.
double reuse_degree(const KernelInstance& instance);

// Average DRAM transactions per warp for the home access of the unoptimized
// kernel, over all warps of a workgroup and all (i, j).
double coalescing_degree(const KernelInstance& instance, const DeviceDescriptor& dev);

// Coalescing degree of the home access displaced by col_shift columns.
double shifted_coalescing_degree(const KernelInstance& instance, std::int64_t col_shift,
                                 const DeviceDescriptor& dev);

// Sum over the stencil's offsets of their per-warp transaction counts.
double stencil_transactions(const KernelInstance& instance, const DeviceDescriptor& dev);

// Home coordinates touched by workgroup (0,0) at iteration (0,0), all (i, j).
HomeBox home_bounding_box(const KernelInstance& instance);

// Region covering inclusive rows [row_min, row_max] and columns
// [col_min, col_max], with the column range aligned outward to whole segments.
Footprint make_footprint(std::int64_t row_min, std::int64_t row_max, std::int64_t col_min,
                         std::int64_t col_max, const DeviceDescriptor& dev);

Footprint footprint(const KernelInstance& instance, const DeviceDescriptor& dev);

FeatureVector extract_features(const KernelInstance& instance, const DeviceDescriptor& dev);

// Feature values that cannot come out of extract_features (used when
// re-reading persisted rows).
std::vector<std::string> check_feature_invariants(const FeatureVector& features,
                                                  const DeviceDescriptor& dev);

}  // namespace lmtune
