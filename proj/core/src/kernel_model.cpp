// Copyright 2026 The lmtune Authors
// SPDX-License-Identifier: Apache-2.0

#include "lmtune/kernel_model.hpp"

#include <cstdlib>
#include <sstream>

#include "lmtune/errors.hpp"

namespace lmtune {

namespace {

constexpr std::array<std::string_view, 7> kPatternNames = {
    "xy-reuse",    "x-reuse-row",        "x-reuse-col",        "y-reuse-row",
    "y-reuse-col", "no-reuse-row-major", "no-reuse-col-major",
};

constexpr std::array<std::string_view, 3> kShapeNames = {"rect", "diamond", "star"};

bool offset_in_stencil(StencilShape shape, int radius, int dr, int dc) {
  const int ar = std::abs(dr);
  const int ac = std::abs(dc);
  switch (shape) {
    case StencilShape::kRectangular:
      return ar <= radius && ac <= radius;
    case StencilShape::kDiamond:
      return ar + ac <= radius;
    case StencilShape::kStar:
      return (dr == 0 || dc == 0) && ar <= radius && ac <= radius;
  }
  return false;
}

}  // namespace

std::string_view to_string(HomeAccessPattern pattern) {
  return kPatternNames[static_cast<std::size_t>(pattern)];
}

std::optional<HomeAccessPattern> parse_pattern(std::string_view name) {
  for (std::size_t k = 0; k < kPatternNames.size(); ++k) {
    if (kPatternNames[k] == name) return static_cast<HomeAccessPattern>(k);
  }
  return std::nullopt;
}

std::string_view to_string(StencilShape shape) {
  return kShapeNames[static_cast<std::size_t>(shape)];
}

std::optional<StencilShape> parse_shape(std::string_view name) {
  for (std::size_t k = 0; k < kShapeNames.size(); ++k) {
    if (kShapeNames[k] == name) return static_cast<StencilShape>(k);
  }
  return std::nullopt;
}

std::string_view to_string(Variant variant) {
  return variant == Variant::kBaseline ? "baseline" : "optimized";
}

std::vector<Offset> stencil_offsets(const StencilPattern& stencil) {
  std::vector<Offset> offsets;
  const int r = stencil.radius;
  for (int dr = -r; dr <= r; ++dr) {
    for (int dc = -r; dc <= r; ++dc) {
      if (offset_in_stencil(stencil.shape, r, dr, dc)) offsets.push_back({dr, dc});
    }
  }
  return offsets;
}

OffsetExtent offset_extent(const StencilPattern& stencil) {
  // Every supported shape reaches the full radius along both axes.
  const int r = stencil.radius;
  return {-r, r, -r, r};
}

std::int64_t num_wus_x(const LaunchConfig& launch, const TemplateParams& params) {
  return params.out_w / launch.grid_x;
}

std::int64_t num_wus_y(const LaunchConfig& launch, const TemplateParams& params) {
  return params.out_h / launch.grid_y;
}

Coord home_coordinate(HomeAccessPattern pattern, Coord wu, std::int64_t i, std::int64_t j,
                      const TemplateParams& params) {
  const std::int64_t wx = wu.x();
  const std::int64_t wy = wu.y();
  switch (pattern) {
    case HomeAccessPattern::kXYReuse:
      return {i, j};
    case HomeAccessPattern::kXReuseRow:
      return {wy, j};
    case HomeAccessPattern::kXReuseCol:
      return {j, wy};
    case HomeAccessPattern::kYReuseRow:
      return {wx, j};
    case HomeAccessPattern::kYReuseCol:
      return {j, wx};
    case HomeAccessPattern::kNoReuseRowMajor:
      return {wy * params.n + i, wx * params.m + j};
    case HomeAccessPattern::kNoReuseColMajor:
      return {wy * params.m + j, wx * params.n + i};
  }
  return {};
}

Coord work_unit_for(const LaunchConfig& launch, const TemplateParams& params, Coord wg, Coord wi,
                    Coord iter) {
  const std::int64_t nx = num_wus_x(launch, params);
  const std::int64_t ny = num_wus_y(launch, params);
  const std::int64_t x = wg.x() * (launch.wg_x * nx) + iter.x() * launch.wg_x + wi.x();
  const std::int64_t y = wg.y() * (launch.wg_y * ny) + iter.y() * launch.wg_y + wi.y();
  return Coord::xy(x, y);
}

std::vector<std::string> validate_instance(const KernelInstance& instance) {
  const TemplateParams& p = instance.params;
  const LaunchConfig& l = instance.launch;
  std::vector<std::string> out;
  auto fail = [&out](auto&&... parts) {
    std::ostringstream os;
    (os << ... << parts);
    out.push_back(os.str());
  };

  if (p.in_h < 1) fail("in_h ", p.in_h, " < 1");
  if (p.in_w < 1) fail("in_w ", p.in_w, " < 1");
  if (p.out_h < 1) fail("out_h ", p.out_h, " < 1");
  if (p.out_w < 1) fail("out_w ", p.out_w, " < 1");
  if (p.n < 1) fail("n ", p.n, " < 1");
  if (p.m < 1) fail("m ", p.m, " < 1");
  if (p.stencil.radius < 0) fail("stencil radius ", p.stencil.radius, " < 0");
  const std::pair<const char*, int> counts[] = {
      {"num_comp_ilb", p.num_comp_ilb},     {"num_comp_ep", p.num_comp_ep},
      {"num_coal_ilb", p.num_coal_ilb},     {"num_coal_ep", p.num_coal_ep},
      {"num_uncoal_ilb", p.num_uncoal_ilb}, {"num_uncoal_ep", p.num_uncoal_ep},
  };
  for (const auto& [name, value] : counts) {
    if (value < 0) fail(name, " ", value, " < 0");
  }

  const std::pair<const char*, std::int64_t> dims[] = {
      {"grid_x", l.grid_x}, {"grid_y", l.grid_y}, {"wg_x", l.wg_x}, {"wg_y", l.wg_y}};
  bool dims_ok = true;
  for (const auto& [name, value] : dims) {
    if (!is_power_of_two(value)) {
      fail(name, " ", value, " is not a power of two");
      dims_ok = false;
    }
  }
  if (!dims_ok) return out;

  if (l.wg_x > l.grid_x) fail("wg_x ", l.wg_x, " > grid_x ", l.grid_x);
  if (l.wg_y > l.grid_y) fail("wg_y ", l.wg_y, " > grid_y ", l.grid_y);
  if (l.wg_size() > 1024) fail("workgroup size ", l.wg_size(), " > 1024");
  if (l.grid_size() < 512) fail("grid size ", l.grid_size(), " < 512");
  if (p.out_w >= 1 && p.out_w % l.grid_x != 0) {
    fail("grid_x ", l.grid_x, " does not divide out_w ", p.out_w);
  }
  if (p.out_h >= 1 && p.out_h % l.grid_y != 0) {
    fail("grid_y ", l.grid_y, " does not divide out_h ", p.out_h);
  }
  return out;
}

void require_valid(const KernelInstance& instance) {
  auto violations = validate_instance(instance);
  if (!violations.empty()) throw ValidationError(std::move(violations));
}

std::string instance_key(const KernelInstance& instance) {
  const TemplateParams& p = instance.params;
  const LaunchConfig& l = instance.launch;
  std::ostringstream os;
  os << to_string(p.pattern) << '_' << p.n << 'x' << p.m << '_' << to_string(p.stencil.shape)
     << p.stencil.radius << "_c" << p.num_comp_ilb << '.' << p.num_comp_ep << "_a"
     << p.num_coal_ilb << '.' << p.num_coal_ep << '.' << p.num_uncoal_ilb << '.'
     << p.num_uncoal_ep << "_i" << p.in_h << 'x' << p.in_w << "_o" << p.out_h << 'x' << p.out_w
     << "_g" << l.grid_x << 'x' << l.grid_y << "_w" << l.wg_x << 'x' << l.wg_y;
  return os.str();
}

}  // namespace lmtune
