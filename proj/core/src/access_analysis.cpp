// Copyright 2026 The lmtune Authors
// SPDX-License-Identifier: Apache-2.0

#include "lmtune/access_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "lmtune/cost_model.hpp"

namespace lmtune {

namespace {

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

// Segments touched by `lanes` consecutive elements with element stride
// `stride` starting at a multiple of lanes*stride. Valid for power-of-two
// lanes, stride and segment size.
std::int64_t strided_segments(std::int64_t lanes, std::int64_t stride, std::int64_t seg_elems) {
  return std::min(lanes, ceil_div(lanes * stride, seg_elems));
}

// Per-warp transaction count of the home access, shifted right by col_shift
// columns, by enumerating the addresses of every warp of workgroup (0,0) for
// (i, j) in [0, i_end) x [0, j_end).
double enumerate_coalescing(const KernelInstance& instance, const DeviceDescriptor& dev,
                            Offset shift, std::int64_t i_end, std::int64_t j_end) {
  const TemplateParams& p = instance.params;
  const LaunchConfig& l = instance.launch;
  const std::int64_t lanes = l.wg_size();
  const std::int64_t warps = ceil_div(lanes, dev.warp_size);
  std::vector<std::int64_t> addrs;
  addrs.reserve(static_cast<std::size_t>(dev.warp_size));
  double total = 0.0;
  for (std::int64_t i = 0; i < i_end; ++i) {
    for (std::int64_t j = 0; j < j_end; ++j) {
      for (std::int64_t w = 0; w < warps; ++w) {
        addrs.clear();
        for (std::int64_t lid = w * dev.warp_size; lid < std::min(lanes, (w + 1) * dev.warp_size);
             ++lid) {
          const Coord wi = Coord::xy(lid % l.wg_x, lid / l.wg_x);
          const Coord wu = work_unit_for(l, p, Coord{}, wi, Coord{});
          Coord home = home_coordinate(p.pattern, wu, i, j, p);
          home.row += shift.d_row;
          home.col += shift.d_col;
          addrs.push_back(element_address(p, home, dev));
        }
        total += static_cast<double>(warp_transactions(addrs, dev));
      }
    }
  }
  return total / static_cast<double>(warps * i_end * j_end);
}

}  // namespace

WarpShape warp_shape(const LaunchConfig& launch, const DeviceDescriptor& dev) {
  const std::int64_t lanes_x = std::min(launch.wg_x, dev.warp_size);
  const std::int64_t lanes_y = std::min(dev.warp_size / lanes_x, launch.wg_y);
  return {lanes_x, lanes_y};
}

std::int64_t warp_transactions(std::span<const std::int64_t> byte_addresses,
                               const DeviceDescriptor& dev) {
  std::vector<std::int64_t> segments;
  segments.reserve(byte_addresses.size());
  for (std::int64_t a : byte_addresses) segments.push_back(floor_div(a, dev.transaction_bytes));
  std::sort(segments.begin(), segments.end());
  return std::unique(segments.begin(), segments.end()) - segments.begin();
}

std::int64_t element_address(const TemplateParams& params, Coord element,
                             const DeviceDescriptor& dev) {
  return (element.row * params.in_w + element.col) * dev.element_bytes;
}

double reuse_degree(const KernelInstance& instance) {
  const LaunchConfig& l = instance.launch;
  switch (instance.params.pattern) {
    case HomeAccessPattern::kXYReuse:
      return static_cast<double>(l.wg_size());
    case HomeAccessPattern::kXReuseRow:
    case HomeAccessPattern::kXReuseCol:
      return static_cast<double>(l.wg_x);
    case HomeAccessPattern::kYReuseRow:
    case HomeAccessPattern::kYReuseCol:
      return static_cast<double>(l.wg_y);
    case HomeAccessPattern::kNoReuseRowMajor:
    case HomeAccessPattern::kNoReuseColMajor:
      return 1.0;
  }
  return 1.0;
}

double coalescing_degree(const KernelInstance& instance, const DeviceDescriptor& dev) {
  const TemplateParams& p = instance.params;
  const std::int64_t row_stride = p.in_w * dev.element_bytes;
  if (row_stride % dev.transaction_bytes != 0) return enumerate_coalescing(instance, dev, Offset{}, p.n, p.m);

  // Distinct rows land in distinct segments; within a row, lanes addressing
  // consecutive work units are aligned to their own block size.
  const WarpShape ws = warp_shape(instance.launch, dev);
  const std::int64_t seg = dev.segment_elems();
  std::int64_t tx = 1;
  switch (p.pattern) {
    case HomeAccessPattern::kXYReuse:
      tx = 1;
      break;
    case HomeAccessPattern::kXReuseRow:
      tx = ws.lanes_y;
      break;
    case HomeAccessPattern::kXReuseCol:
      tx = strided_segments(ws.lanes_y, 1, seg);
      break;
    case HomeAccessPattern::kYReuseRow:
      tx = ws.lanes_x;
      break;
    case HomeAccessPattern::kYReuseCol:
      tx = strided_segments(ws.lanes_x, 1, seg);
      break;
    case HomeAccessPattern::kNoReuseRowMajor:
      tx = ws.lanes_y * strided_segments(ws.lanes_x, p.m, seg);
      break;
    case HomeAccessPattern::kNoReuseColMajor:
      tx = ws.lanes_y * strided_segments(ws.lanes_x, p.n, seg);
      break;
  }
  return static_cast<double>(tx);
}

double shifted_coalescing_degree(const KernelInstance& instance, std::int64_t col_shift,
                                 const DeviceDescriptor& dev) {
  const TemplateParams& p = instance.params;
  if (col_shift == 0) return coalescing_degree(instance, dev);
  if ((p.in_w * dev.element_bytes) % dev.transaction_bytes != 0) {
    return enumerate_coalescing(instance, dev, Offset{0, static_cast<int>(col_shift)}, p.n, p.m);
  }
  // With whole-segment rows only the column pattern within each row matters.
  // That pattern is fixed for all (i, j) except in the no-reuse walks, where
  // the column advances with j (row-major) or i (column-major).
  const Offset shift{0, static_cast<int>(col_shift)};
  switch (p.pattern) {
    case HomeAccessPattern::kNoReuseRowMajor:
      return enumerate_coalescing(instance, dev, shift, 1, p.m);
    case HomeAccessPattern::kNoReuseColMajor:
      return enumerate_coalescing(instance, dev, shift, p.n, 1);
    default:
      return enumerate_coalescing(instance, dev, shift, 1, 1);
  }
}

double stencil_transactions(const KernelInstance& instance, const DeviceDescriptor& dev) {
  const TemplateParams& p = instance.params;
  if ((p.in_w * dev.element_bytes) % dev.transaction_bytes != 0) {
    // Row offsets change segment alignment too; enumerate every offset.
    double total = 0.0;
    for (const Offset& o : stencil_offsets(p.stencil)) {
      total += enumerate_coalescing(instance, dev, o, p.n, p.m);
    }
    return total;
  }
  std::map<int, double> by_shift;
  double total = 0.0;
  for (const Offset& o : stencil_offsets(instance.params.stencil)) {
    auto [it, inserted] = by_shift.try_emplace(o.d_col, 0.0);
    if (inserted) it->second = shifted_coalescing_degree(instance, o.d_col, dev);
    total += it->second;
  }
  return total;
}

HomeBox home_bounding_box(const KernelInstance& instance) {
  const TemplateParams& p = instance.params;
  const LaunchConfig& l = instance.launch;
  auto box = [](std::int64_t rows, std::int64_t cols) {
    return HomeBox{Coord{0, 0}, Coord{rows - 1, cols - 1}};
  };
  switch (p.pattern) {
    case HomeAccessPattern::kXYReuse:
      return box(p.n, p.m);
    case HomeAccessPattern::kXReuseRow:
      return box(l.wg_y, p.m);
    case HomeAccessPattern::kXReuseCol:
      return box(p.m, l.wg_y);
    case HomeAccessPattern::kYReuseRow:
      return box(l.wg_x, p.m);
    case HomeAccessPattern::kYReuseCol:
      return box(p.m, l.wg_x);
    case HomeAccessPattern::kNoReuseRowMajor:
      return box(l.wg_y * p.n, l.wg_x * p.m);
    case HomeAccessPattern::kNoReuseColMajor:
      return box(l.wg_y * p.m, l.wg_x * p.n);
  }
  return box(1, 1);
}

Footprint make_footprint(std::int64_t row_min, std::int64_t row_max, std::int64_t col_min,
                         std::int64_t col_max, const DeviceDescriptor& dev) {
  const std::int64_t seg = dev.segment_elems();
  Footprint fp;
  fp.row_start = row_min;
  fp.row_span = row_max - row_min + 1;
  fp.col_span = col_max - col_min + 1;
  fp.col_start = floor_div(col_min, seg) * seg;
  fp.padded_col_span = ceil_div(col_max + 1 - fp.col_start, seg) * seg;
  fp.bytes = fp.row_span * fp.padded_col_span * dev.element_bytes;
  return fp;
}

Footprint footprint(const KernelInstance& instance, const DeviceDescriptor& dev) {
  const HomeBox home = home_bounding_box(instance);
  const OffsetExtent ext = offset_extent(instance.params.stencil);
  return make_footprint(home.min.row + ext.min_row, home.max.row + ext.max_row,
                        home.min.col + ext.min_col, home.max.col + ext.max_col, dev);
}

FeatureVector extract_features(const KernelInstance& instance, const DeviceDescriptor& dev) {
  require_valid(instance);
  const TemplateParams& p = instance.params;
  const LaunchConfig& l = instance.launch;
  const OffsetExtent ext = offset_extent(p.stencil);

  FeatureVector f;
  f[Feature::kReuseDegree] = reuse_degree(instance);
  f[Feature::kLmemBytes] = static_cast<double>(footprint(instance, dev).bytes);
  f[Feature::kNoncoalescingDegree] = coalescing_degree(instance, dev);
  f[Feature::kNumTargetAccesses] = static_cast<double>(stencil_offsets(p.stencil).size());
  f[Feature::kOffsetMinRow] = ext.min_row;
  f[Feature::kOffsetMaxRow] = ext.max_row;
  f[Feature::kOffsetMinCol] = ext.min_col;
  f[Feature::kOffsetMaxCol] = ext.max_col;
  f[Feature::kCompIlb] = p.num_comp_ilb;
  f[Feature::kCompEp] = p.num_comp_ep;
  f[Feature::kCtxCoalIlb] = p.num_coal_ilb;
  f[Feature::kCtxUncoalIlb] = p.num_uncoal_ilb;
  f[Feature::kCtxCoalEp] = p.num_coal_ep;
  f[Feature::kCtxUncoalEp] = p.num_uncoal_ep;
  f[Feature::kRegsPerThread] = estimate_registers(p, Variant::kBaseline, dev);
  f[Feature::kGridSize] = static_cast<double>(l.grid_size());
  f[Feature::kWgSize] = static_cast<double>(l.wg_size());
  f[Feature::kWusPerWorkitem] = static_cast<double>(num_wus_x(l, p) * num_wus_y(l, p));
  return f;
}

std::vector<std::string> check_feature_invariants(const FeatureVector& f,
                                                  const DeviceDescriptor& dev) {
  std::vector<std::string> out;
  for (std::size_t k = 0; k < kNumFeatures; ++k) {
    if (!std::isfinite(f.values[k])) out.push_back(std::string(kFeatureNames[k]) + " not finite");
  }
  if (!out.empty()) return out;

  if (f[Feature::kReuseDegree] < 1.0) out.push_back("reuse_degree < 1");
  const double nc = f[Feature::kNoncoalescingDegree];
  if (nc < 1.0 || nc > static_cast<double>(dev.warp_size)) {
    out.push_back("noncoalescing_degree outside [1, warp_size]");
  }
  if (f[Feature::kLmemBytes] <= 0.0) out.push_back("lmem_bytes <= 0");
  if (f[Feature::kOffsetMinRow] > 0 || f[Feature::kOffsetMaxRow] < 0 ||
      f[Feature::kOffsetMinCol] > 0 || f[Feature::kOffsetMaxCol] < 0) {
    out.push_back("stencil offsets do not bracket the home element");
  }
  // Radius r admits (2r+1)^2, 2r(r+1)+1 or 4r+1 points.
  const double r = f[Feature::kOffsetMaxRow];
  const double k = f[Feature::kNumTargetAccesses];
  if (k != (2 * r + 1) * (2 * r + 1) && k != 2 * r * (r + 1) + 1 && k != 4 * r + 1) {
    std::ostringstream os;
    os << "num_target_accesses " << k << " inconsistent with stencil radius " << r;
    out.push_back(os.str());
  }
  for (Feature c : {Feature::kCompIlb, Feature::kCompEp, Feature::kCtxCoalIlb,
                    Feature::kCtxUncoalIlb, Feature::kCtxCoalEp, Feature::kCtxUncoalEp}) {
    if (f[c] < 0) out.push_back(std::string(kFeatureNames[static_cast<std::size_t>(c)]) + " < 0");
  }
  if (f[Feature::kRegsPerThread] < 1 ||
      f[Feature::kRegsPerThread] > static_cast<double>(dev.max_regs_per_thread)) {
    out.push_back("regs_per_thread outside [1, max_regs_per_thread]");
  }
  if (f[Feature::kGridSize] < f[Feature::kWgSize]) out.push_back("grid_size < wg_size");
  if (f[Feature::kWgSize] < 1) out.push_back("wg_size < 1");
  if (f[Feature::kWusPerWorkitem] < 1) out.push_back("wus_per_workitem < 1");
  return out;
}

}  // namespace lmtune
