// Copyright 2026 The lmtune Authors
// SPDX-License-Identifier: Apache-2.0
//
// Domain types of the synthetic kernel template and the index arithmetic shared
// by feature extraction, code generation and the cost model.
//
// Coordinates follow the OpenCL convention: x is the column (fastest varying,
// get_local_id(0)), y is the row. A Coord stores {row, col}; Coord::xy() builds
// one from (x, y) for work-unit / workgroup / workitem indices.

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace lmtune {

enum class HomeAccessPattern {
  kXYReuse,
  kXReuseRow,
  kXReuseCol,
  kYReuseRow,
  kYReuseCol,
  kNoReuseRowMajor,
  kNoReuseColMajor,
};

inline constexpr std::array<HomeAccessPattern, 7> kAllPatterns = {
    HomeAccessPattern::kXYReuse,         HomeAccessPattern::kXReuseRow,
    HomeAccessPattern::kXReuseCol,       HomeAccessPattern::kYReuseRow,
    HomeAccessPattern::kYReuseCol,       HomeAccessPattern::kNoReuseRowMajor,
    HomeAccessPattern::kNoReuseColMajor,
};

// "xy-reuse", "x-reuse-row", ..., "no-reuse-col-major".
std::string_view to_string(HomeAccessPattern pattern);
std::optional<HomeAccessPattern> parse_pattern(std::string_view name);

enum class StencilShape { kRectangular, kDiamond, kStar };

inline constexpr std::array<StencilShape, 3> kAllShapes = {
    StencilShape::kRectangular, StencilShape::kDiamond, StencilShape::kStar};

// "rect", "diamond", "star".
std::string_view to_string(StencilShape shape);
std::optional<StencilShape> parse_shape(std::string_view name);

struct StencilPattern {
  StencilShape shape = StencilShape::kRectangular;
  int radius = 0;

  friend bool operator==(const StencilPattern&, const StencilPattern&) = default;
};

struct Offset {
  int d_row = 0;
  int d_col = 0;

  friend bool operator==(const Offset&, const Offset&) = default;
};

// Offsets of the stencil around the home element, row-major order. Always
// contains {0, 0}.
std::vector<Offset> stencil_offsets(const StencilPattern& stencil);

struct OffsetExtent {
  int min_row = 0;
  int max_row = 0;
  int min_col = 0;
  int max_col = 0;
};

OffsetExtent offset_extent(const StencilPattern& stencil);

enum class Variant { kBaseline, kOptimized };

std::string_view to_string(Variant variant);

struct TemplateParams {
  std::int64_t in_h = 2048;
  std::int64_t in_w = 2048;
  std::int64_t out_h = 2048;
  std::int64_t out_w = 2048;
  HomeAccessPattern pattern = HomeAccessPattern::kXYReuse;
  std::int64_t n = 1;
  std::int64_t m = 1;
  StencilPattern stencil;
  int num_comp_ilb = 0;
  int num_comp_ep = 0;
  int num_coal_ilb = 0;
  int num_coal_ep = 0;
  int num_uncoal_ilb = 0;
  int num_uncoal_ep = 0;

  int num_ctx_accesses() const {
    return num_coal_ilb + num_coal_ep + num_uncoal_ilb + num_uncoal_ep;
  }

  friend bool operator==(const TemplateParams&, const TemplateParams&) = default;
};

struct LaunchConfig {
  std::int64_t grid_x = 0;
  std::int64_t grid_y = 0;
  std::int64_t wg_x = 0;
  std::int64_t wg_y = 0;

  std::int64_t grid_size() const { return grid_x * grid_y; }
  std::int64_t wg_size() const { return wg_x * wg_y; }
  std::int64_t groups_x() const { return grid_x / wg_x; }
  std::int64_t groups_y() const { return grid_y / wg_y; }

  friend bool operator==(const LaunchConfig&, const LaunchConfig&) = default;
};

struct KernelInstance {
  TemplateParams params;
  LaunchConfig launch;

  friend bool operator==(const KernelInstance&, const KernelInstance&) = default;
};

struct Coord {
  std::int64_t row = 0;
  std::int64_t col = 0;

  static constexpr Coord xy(std::int64_t x, std::int64_t y) { return Coord{y, x}; }
  constexpr std::int64_t x() const { return col; }
  constexpr std::int64_t y() const { return row; }

  friend bool operator==(const Coord&, const Coord&) = default;
  friend auto operator<=>(const Coord&, const Coord&) = default;
};

// Work units processed by each workitem along x / y (NUM_WUS_X / NUM_WUS_Y).
std::int64_t num_wus_x(const LaunchConfig& launch, const TemplateParams& params);
std::int64_t num_wus_y(const LaunchConfig& launch, const TemplateParams& params);

// Home coordinate (idx_o, idx_i) of the target-array access for work unit `wu`
// at loop indices (i, j):
//
//   xy-reuse            (i, j)
//   x-reuse-row         (wu_y, j)
//   x-reuse-col         (j, wu_y)
//   y-reuse-row         (wu_x, j)
//   y-reuse-col         (j, wu_x)
//   no-reuse-row-major  (wu_y*N + i, wu_x*M + j)
//   no-reuse-col-major  (wu_y*M + j, wu_x*N + i)
Coord home_coordinate(HomeAccessPattern pattern, Coord wu, std::int64_t i, std::int64_t j,
                      const TemplateParams& params);

// Work unit handled by workitem `wi` of workgroup `wg` on work-unit iteration
// `iter`: blocked across workgroups, cyclic across the workitems of a block.
Coord work_unit_for(const LaunchConfig& launch, const TemplateParams& params, Coord wg, Coord wi,
                    Coord iter);

// Names every violated invariant; empty when the instance is valid.
std::vector<std::string> validate_instance(const KernelInstance& instance);

// Throws ValidationError when validate_instance() reports anything.
void require_valid(const KernelInstance& instance);

// Stable text key, e.g. "xy-reuse_8x16_rect1_c5.9_g512x512_w16x16".
std::string instance_key(const KernelInstance& instance);

inline constexpr bool is_power_of_two(std::int64_t v) { return v > 0 && (v & (v - 1)) == 0; }

}  // namespace lmtune
