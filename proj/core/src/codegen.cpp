// Copyright 2026 The lmtune Authors
// SPDX-License-Identifier: Apache-2.0

#include "lmtune/codegen.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "lmtune/errors.hpp"

namespace lmtune {

namespace {

std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

// FMA chain coefficients; close to 1 so the output stays sensitive to every
// value read.
constexpr const char* kFma = "fma(%s, 0.99f, 0.01f)";

std::string plus_offset(const std::string& expr, int offset) {
  if (offset == 0) return expr;
  if (offset > 0) return expr + " + " + std::to_string(offset);
  return expr + " - " + std::to_string(-offset);
}

struct HomeExpr {
  std::string row;
  std::string col;
};

// Home coordinate as OpenCL expressions. With `origin` set the loop indices
// are taken as zero (first home element of a work-unit block).
HomeExpr home_expr(HomeAccessPattern pattern, const std::string& wx, const std::string& wy,
                   bool origin) {
  const std::string i = origin ? "0" : "i";
  const std::string j = origin ? "0" : "j";
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
      if (origin) return {wy + " * N", wx + " * M"};
      return {wy + " * N + i", wx + " * M + j"};
    case HomeAccessPattern::kNoReuseColMajor:
      if (origin) return {wy + " * M", wx + " * N"};
      return {wy + " * M + j", wx + " * N + i"};
  }
  return {i, j};
}

std::string fma_stmt(const std::string& var) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), kFma, var.c_str());
  return var + " = " + buf + ";";
}

class Writer {
 public:
  void line(const std::string& text) {
    out_ << std::string(static_cast<std::size_t>(depth_) * 2, ' ') << text << '\n';
  }
  void open(const std::string& text) {
    line(text + " {");
    ++depth_;
  }
  void close() {
    --depth_;
    line("}");
  }
  std::string str() const { return out_.str(); }

 private:
  std::ostringstream out_;
  int depth_ = 0;
};

std::vector<Define> common_defines(const KernelInstance& instance, const DeviceDescriptor& dev) {
  const TemplateParams& p = instance.params;
  const LaunchConfig& l = instance.launch;
  const std::int64_t seg = dev.segment_elems();
  const int r = p.stencil.radius;
  return {
      {"IN_H", p.in_h},
      {"IN_W", p.in_w},
      {"IN2_W", p.in_w},
      {"OUT_H", p.out_h},
      {"OUT_W", p.out_w},
      {"HOME_ACCESS_PATTERN", static_cast<std::int64_t>(p.pattern)},
      {"N", p.n},
      {"M", p.m},
      {"STENCIL_PATTERN", static_cast<std::int64_t>(p.stencil.shape)},
      {"STENCIL_RADIUS", r},
      {"NUM_COMP_ILB", p.num_comp_ilb},
      {"NUM_COMP_EP", p.num_comp_ep},
      {"NUM_COAL_ACCESSES_ILB", p.num_coal_ilb},
      {"NUM_COAL_ACCESSES_EP", p.num_coal_ep},
      {"NUM_UNCOAL_ACCESSES_ILB", p.num_uncoal_ilb},
      {"NUM_UNCOAL_ACCESSES_EP", p.num_uncoal_ep},
      {"WG_W", l.wg_x},
      {"WG_H", l.wg_y},
      {"NUM_WUS_X", num_wus_x(l, p)},
      {"NUM_WUS_Y", num_wus_y(l, p)},
      {"IN_ORIGIN_ROW", r},
      {"IN_ORIGIN_COL", ceil_div(r, seg) * seg},
  };
}

// Contextual in2 reads folded into `var`. Coalesced reads walk a row
// (consecutive wu_x -> consecutive addresses); non-coalesced reads walk a
// column (consecutive wu_x -> addresses IN2_W apart).
void emit_context(Writer& w, const std::string& var, int coalesced, int uncoalesced,
                  const std::string& sweep, int first_row) {
  for (int k = 0; k < coalesced; ++k) {
    w.line(var + " += in2[(" + plus_offset("wu_y" + sweep, first_row + k) + ") * IN2_W + wu_x];");
  }
  for (int k = 0; k < uncoalesced; ++k) {
    w.line(var + " += in2[(" + plus_offset("wu_x", first_row + k) + ") * IN2_W + wu_y" + sweep +
           "];");
  }
}

struct Body {
  bool optimized = false;
};

std::string emit(const KernelInstance& instance, Variant variant) {
  const TemplateParams& p = instance.params;
  const std::vector<Offset> offsets = stencil_offsets(p.stencil);
  const OffsetExtent ext = offset_extent(p.stencil);
  const bool opt = variant == Variant::kOptimized;

  Writer w;
  w.line("// " + std::string(to_string(p.pattern)) + ", " + std::string(to_string(p.stencil.shape)) +
         " stencil radius " + std::to_string(p.stencil.radius) + ", " +
         std::string(to_string(variant)) + " variant.");
  w.line("// Geometry and template constants are supplied as -D bindings.");
  w.open(std::string("__kernel void synthetic_") + std::string(to_string(variant)) +
         "(__global const float* in, __global const float* in2, __global float* out)");
  if (opt) w.line("__local float lmem[LMEM_ROWS * LMEM_W];");
  w.line("const int wg_x = get_group_id(0);");
  w.line("const int wg_y = get_group_id(1);");
  w.line("const int wi_x = get_local_id(0);");
  w.line("const int wi_y = get_local_id(1);");
  if (opt) {
    w.line("const int lid = wi_y * WG_W + wi_x;");
    w.line("const int warp = lid / WARP_LANES;");
    w.line("const int lane = lid % WARP_LANES;");
  }
  w.open("for (int iter_y = 0; iter_y < NUM_WUS_Y; ++iter_y)");
  w.open("for (int iter_x = 0; iter_x < NUM_WUS_X; ++iter_x)");
  w.line("const int wu_x = wg_x * (WG_W * NUM_WUS_X) + iter_x * WG_W + wi_x;");
  w.line("const int wu_y = wg_y * (WG_H * NUM_WUS_Y) + iter_y * WG_H + wi_y;");

  if (opt) {
    // Region origin follows the block's first work unit; the column origin is
    // aligned down to a segment boundary of the padded array.
    w.line("const int wu0_x = wg_x * (WG_W * NUM_WUS_X) + iter_x * WG_W;");
    w.line("const int wu0_y = wg_y * (WG_H * NUM_WUS_Y) + iter_y * WG_H;");
    const HomeExpr base = home_expr(p.pattern, "wu0_x", "wu0_y", true);
    w.line("const int reg_row = " + plus_offset(base.row, ext.min_row) + ";");
    w.line("const int reg_col = (" + plus_offset("IN_ORIGIN_COL + " + base.col, ext.min_col) +
           ") / SEG_ELEMS * SEG_ELEMS - IN_ORIGIN_COL;");
    w.line("barrier(CLK_LOCAL_MEM_FENCE);");
    w.open("for (int s = warp; s < LMEM_SEGMENTS; s += NUM_WARPS)");
    w.line("const int r = s / SEGS_PER_ROW;");
    w.line("const int c0 = (s % SEGS_PER_ROW) * SEG_ELEMS;");
    w.open("for (int c = c0 + lane; c < c0 + SEG_ELEMS; c += WARP_LANES)");
    w.line(
        "lmem[r * LMEM_W + c] = in[(IN_ORIGIN_ROW + reg_row + r) * IN_W + IN_ORIGIN_COL + "
        "reg_col + c];");
    w.close();
    w.close();
    w.line("barrier(CLK_LOCAL_MEM_FENCE);");
  }

  w.line("float acc = 0.0f;");
  w.open("for (int i = 0; i < N; ++i)");
  w.open("for (int j = 0; j < M; ++j)");
  const HomeExpr home = home_expr(p.pattern, "wu_x", "wu_y", false);
  w.line("const int idx_o = " + home.row + ";");
  w.line("const int idx_i = " + home.col + ";");
  for (std::size_t k = 0; k < offsets.size(); ++k) {
    const Offset& o = offsets[k];
    std::string read;
    if (opt) {
      read = "lmem[(" + plus_offset("idx_o", o.d_row) + " - reg_row) * LMEM_W + " +
             plus_offset("idx_i", o.d_col) + " - reg_col]";
    } else {
      read = "in[(" + plus_offset("IN_ORIGIN_ROW + idx_o", o.d_row) + ") * IN_W + " +
             plus_offset("IN_ORIGIN_COL + idx_i", o.d_col) + "]";
    }
    w.line((k == 0 ? "float t = " : "t += ") + read + ";");
  }
  emit_context(w, "t", p.num_coal_ilb, p.num_uncoal_ilb, " + i + j", 0);
  for (int k = 0; k < p.num_comp_ilb; ++k) w.line(fma_stmt("t"));
  w.line("acc += t;");
  w.close();
  w.close();

  w.line("float e = acc;");
  emit_context(w, "e", p.num_coal_ep, p.num_uncoal_ep, "", 16);
  for (int k = 0; k < p.num_comp_ep; ++k) w.line(fma_stmt("e"));
  w.line("out[wu_y * OUT_W + wu_x] = e;");
  w.close();
  w.close();
  w.close();
  return w.str();
}

}  // namespace

std::string KernelSource::build_options() const {
  std::string out;
  for (const Define& d : compile_defines) {
    if (!out.empty()) out += ' ';
    out += "-D " + d.name + "=" + std::to_string(d.value);
  }
  return out;
}

std::int64_t KernelSource::define(const std::string& name) const {
  for (const Define& d : compile_defines) {
    if (d.name == name) return d.value;
  }
  throw std::out_of_range("no compile define named " + name);
}

std::int64_t copy_transaction_count(const Footprint& fp, const DeviceDescriptor& dev) {
  return fp.row_span * (fp.padded_col_span * dev.element_bytes / dev.transaction_bytes);
}

CopyPlan plan_copy(const Footprint& fp, const LaunchConfig& launch, const DeviceDescriptor& dev) {
  CopyPlan plan;
  plan.segments_per_row = fp.padded_col_span / dev.segment_elems();
  plan.segments = fp.row_span * plan.segments_per_row;
  plan.lanes_per_warp = std::min(dev.warp_size, launch.wg_size());
  plan.warps = ceil_div(launch.wg_size(), plan.lanes_per_warp);
  plan.max_segments_per_warp = ceil_div(plan.segments, plan.warps);
  return plan;
}

KernelSource emit_baseline(const KernelInstance& instance, const DeviceDescriptor& dev) {
  require_valid(instance);
  KernelSource src;
  src.variant = Variant::kBaseline;
  src.entry_name = "synthetic_baseline";
  src.source_text = emit(instance, Variant::kBaseline);
  src.compile_defines = common_defines(instance, dev);
  return src;
}

KernelSource emit_optimized(const KernelInstance& instance, const Footprint& fp,
                            const DeviceDescriptor& dev) {
  require_valid(instance);
  if (fp.bytes > dev.lmem_capacity_bytes) {
    throw OptimizationInfeasible(static_cast<std::size_t>(fp.bytes),
                                 static_cast<std::size_t>(dev.lmem_capacity_bytes));
  }
  const CopyPlan plan = plan_copy(fp, instance.launch, dev);
  KernelSource src;
  src.variant = Variant::kOptimized;
  src.entry_name = "synthetic_optimized";
  src.source_text = emit(instance, Variant::kOptimized);
  src.compile_defines = common_defines(instance, dev);
  src.compile_defines.insert(src.compile_defines.end(),
                             {
                                 {"LMEM_ROWS", fp.row_span},
                                 {"LMEM_W", fp.padded_col_span},
                                 {"SEG_ELEMS", dev.segment_elems()},
                                 {"SEGS_PER_ROW", plan.segments_per_row},
                                 {"LMEM_SEGMENTS", plan.segments},
                                 {"NUM_WARPS", plan.warps},
                                 {"WARP_LANES", plan.lanes_per_warp},
                             });
  return src;
}

std::string kernel_file_stem(const TemplateParams& params, Variant variant) {
  std::ostringstream os;
  os << to_string(params.pattern) << '_' << params.n << 'x' << params.m << '_'
     << to_string(params.stencil.shape) << params.stencil.radius << '_' << to_string(variant);
  return os.str();
}

std::filesystem::path write_kernel_source(const std::filesystem::path& dir,
                                          const TemplateParams& params,
                                          const KernelSource& source) {
  std::filesystem::create_directories(dir);
  const std::string stem = kernel_file_stem(params, source.variant);
  const auto cl_path = dir / (stem + ".cl");
  {
    std::ofstream cl(cl_path, std::ios::binary);
    cl << source.source_text;
    if (!cl) throw Error("cannot write " + cl_path.string());
  }
  std::ofstream manifest(dir / (stem + ".defines"), std::ios::binary);
  for (const Define& d : source.compile_defines) {
    manifest << "-D " << d.name << '=' << d.value << '\n';
  }
  if (!manifest) throw Error("cannot write manifest for " + cl_path.string());
  return cl_path;
}

}  // namespace lmtune
