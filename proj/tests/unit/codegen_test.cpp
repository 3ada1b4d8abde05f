// Copyright 2026 The lmtune Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "lmtune/codegen.hpp"
#include "lmtune/errors.hpp"
#include "test_util.hpp"

namespace lmtune {
namespace {

using P = HomeAccessPattern;
using testing::make_instance;

const DeviceDescriptor kDev;

std::size_t count(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) {
    ++n;
  }
  return n;
}

// Text of the i/j loop nest and of the epilogue.
std::string loop_body(const std::string& src) {
  const auto begin = src.find("for (int i = 0; i < N; ++i)");
  const auto end = src.find("acc += t;");
  return src.substr(begin, end - begin);
}

std::string epilogue(const std::string& src) {
  const auto begin = src.find("float e = acc;");
  const auto end = src.find("out[");
  return src.substr(begin, end - begin);
}

// Text between the outer work-unit loop header and its closing brace.
std::string work_unit_loop(const std::string& src) {
  return src.substr(src.find("for (int iter_y"));
}

bool balanced(const std::string& src) {
  int paren = 0, brace = 0, bracket = 0;
  for (char c : src) {
    paren += c == '(' ? 1 : c == ')' ? -1 : 0;
    brace += c == '{' ? 1 : c == '}' ? -1 : 0;
    bracket += c == '[' ? 1 : c == ']' ? -1 : 0;
    if (paren < 0 || brace < 0 || bracket < 0) return false;
  }
  return paren == 0 && brace == 0 && bracket == 0;
}

KernelInstance counted_instance() {
  auto inst = make_instance(P::kXYReuse, 8, 8, StencilShape::kRectangular, 1, 16, 16);
  inst.params.num_comp_ilb = 19;
  inst.params.num_comp_ep = 23;
  inst.params.num_coal_ilb = 3;
  inst.params.num_uncoal_ilb = 1;
  inst.params.num_coal_ep = 5;
  inst.params.num_uncoal_ep = 2;
  return inst;
}

TEST(Codegen, FmaCountsMatchParameters) {
  const auto inst = counted_instance();
  for (const KernelSource& k :
       {emit_baseline(inst, kDev), emit_optimized(inst, footprint(inst, kDev), kDev)}) {
    EXPECT_EQ(count(loop_body(k.source_text), "fma("), 19u) << to_string(k.variant);
    EXPECT_EQ(count(epilogue(k.source_text), "fma("), 23u) << to_string(k.variant);
    EXPECT_EQ(count(loop_body(k.source_text), "in2["), 4u);
    EXPECT_EQ(count(epilogue(k.source_text), "in2["), 7u);
    EXPECT_EQ(count(loop_body(k.source_text), "+ wu_y + i + j]"), 1u);
    EXPECT_EQ(count(epilogue(k.source_text), "IN2_W + wu_y]"), 2u);
  }
}

TEST(Codegen, RadiusZeroReadsInOncePerIteration) {
  for (P p : kAllPatterns) {
    const auto inst = make_instance(p, 2, 2, StencilShape::kStar, 0, 16, 16);
    const KernelSource k = emit_baseline(inst, kDev);
    EXPECT_EQ(count(loop_body(k.source_text), "in["), 1u) << to_string(p);
    const KernelSource o = emit_optimized(inst, footprint(inst, kDev), kDev);
    EXPECT_EQ(count(loop_body(o.source_text), "lmem["), 1u) << to_string(p);
  }
}

TEST(Codegen, StencilReadCount) {
  for (StencilShape s : kAllShapes) {
    for (int r = 0; r <= 2; ++r) {
      const auto inst = make_instance(P::kXReuseRow, 8, 4, s, r, 8, 8);
      const auto points = stencil_offsets({s, r}).size();
      EXPECT_EQ(count(loop_body(emit_baseline(inst, kDev).source_text), "in["), points);
      EXPECT_EQ(count(loop_body(emit_optimized(inst, footprint(inst, kDev), kDev).source_text),
                      "lmem["),
                points);
    }
  }
}

TEST(Codegen, StructuralInvariants) {
  std::mt19937_64 rng(41);
  int optimized = 0;
  for (int k = 0; k < 200; ++k) {
    const KernelInstance inst = testing::random_instance(rng);
    const KernelSource base = emit_baseline(inst, kDev);
    EXPECT_EQ(base.entry_name, "synthetic_baseline");
    EXPECT_EQ(count(base.source_text, "__kernel"), 1u);
    EXPECT_TRUE(balanced(base.source_text));
    EXPECT_EQ(count(base.source_text, "__local"), 0u);
    EXPECT_EQ(count(base.source_text, "barrier("), 0u);

    const Footprint fp = footprint(inst, kDev);
    if (fp.bytes > kDev.lmem_capacity_bytes) {
      EXPECT_THROW(emit_optimized(inst, fp, kDev), OptimizationInfeasible);
      continue;
    }
    ++optimized;
    const KernelSource opt = emit_optimized(inst, fp, kDev);
    const std::string& src = opt.source_text;
    EXPECT_EQ(opt.entry_name, "synthetic_optimized");
    EXPECT_EQ(count(src, "__kernel"), 1u);
    EXPECT_TRUE(balanced(src));
    EXPECT_EQ(count(src, "__local float lmem["), 1u);
    EXPECT_GE(count(work_unit_loop(src), "barrier("), 2u);
    EXPECT_EQ(count(loop_body(src), "in["), 0u);
    EXPECT_EQ(opt.define("LMEM_ROWS"), fp.row_span);
    EXPECT_EQ(opt.define("LMEM_W"), fp.padded_col_span);
    EXPECT_EQ(opt.define("LMEM_ROWS") * opt.define("LMEM_W") * kDev.element_bytes, fp.bytes);
    EXPECT_EQ(opt.define("IN_ORIGIN_COL") % kDev.segment_elems(), 0);
  }
  EXPECT_GT(optimized, 50);
}

TEST(Codegen, LocalBufferHasFootprintShape) {
  const auto inst = make_instance(P::kXYReuse, 8, 16, StencilShape::kRectangular, 0, 16, 16);
  const KernelSource opt = emit_optimized(inst, footprint(inst, kDev), kDev);
  EXPECT_EQ(opt.define("LMEM_ROWS"), 8);
  EXPECT_EQ(opt.define("LMEM_W"), 32);
}

TEST(Codegen, SourceDependsOnlyOnTemplateStructure) {
  auto a = make_instance(P::kNoReuseRowMajor, 2, 4, StencilShape::kDiamond, 2, 16, 16);
  auto b = a;
  b.launch = {1024, 512, 32, 4};
  EXPECT_EQ(emit_baseline(a, kDev).source_text, emit_baseline(b, kDev).source_text);
  EXPECT_NE(emit_baseline(a, kDev).compile_defines, emit_baseline(b, kDev).compile_defines);
}

TEST(Codegen, BuildOptions) {
  const KernelSource k =
      emit_baseline(make_instance(P::kXYReuse, 8, 16, StencilShape::kStar, 1, 16, 8), kDev);
  const std::string opts = k.build_options();
  EXPECT_NE(opts.find("-D N=8"), std::string::npos);
  EXPECT_NE(opts.find("-D M=16"), std::string::npos);
  EXPECT_NE(opts.find("-D WG_W=16"), std::string::npos);
  EXPECT_NE(opts.find("-D WG_H=8"), std::string::npos);
  EXPECT_EQ(k.define("NUM_WUS_X"), 4);
  EXPECT_THROW(k.define("NO_SUCH_MACRO"), std::out_of_range);
}

TEST(Codegen, RejectsInvalidInstance) {
  const auto inst = make_instance(P::kXYReuse, 8, 8, StencilShape::kStar, 1, 64, 32);
  EXPECT_THROW(emit_baseline(inst, kDev), ValidationError);
}

TEST(CopyPlan, Examples) {
  const Footprint fp = make_footprint(0, 31, 0, 31, kDev);
  const CopyPlan plan = plan_copy(fp, {512, 512, 16, 16}, kDev);
  EXPECT_EQ(plan.segments, 32);
  EXPECT_EQ(plan.segments_per_row, 1);
  EXPECT_EQ(plan.warps, 8);
  EXPECT_EQ(plan.max_segments_per_warp, 4);

  EXPECT_EQ(copy_transaction_count(fp, kDev), 32);
  EXPECT_EQ(copy_transaction_count(make_footprint(0, 33, 0, 63, kDev), kDev), 68);
  EXPECT_EQ(copy_transaction_count(make_footprint(0, 0, 0, 31, kDev), kDev), 1);
  // Misaligned start spills into a second segment.
  EXPECT_EQ(copy_transaction_count(make_footprint(0, 0, 1, 32, kDev), kDev), 2);
}

TEST(CopyPlan, SmallWorkgroupUsesPartialWarp) {
  const CopyPlan plan = plan_copy(make_footprint(0, 9, 0, 31, kDev), {512, 512, 4, 2}, kDev);
  EXPECT_EQ(plan.warps, 1);
  EXPECT_EQ(plan.lanes_per_warp, 8);
  EXPECT_EQ(plan.max_segments_per_warp, 10);
}

TEST(Codegen, WritesSourceAndDefines) {
  testing::TempDir dir;
  const auto inst = make_instance(P::kYReuseCol, 2, 8, StencilShape::kStar, 1, 16, 16);
  const KernelSource k = emit_baseline(inst, kDev);
  const auto path = write_kernel_source(dir.path(), inst.params, k);
  EXPECT_EQ(path.filename(), "y-reuse-col_2x8_star1_baseline.cl");
  std::ifstream cl(path);
  std::stringstream text;
  text << cl.rdbuf();
  EXPECT_EQ(text.str(), k.source_text);
  std::ifstream defs(dir / "y-reuse-col_2x8_star1_baseline.defines");
  std::string line;
  std::size_t lines = 0;
  while (std::getline(defs, line)) {
    EXPECT_EQ(line.rfind("-D ", 0), 0u);
    ++lines;
  }
  EXPECT_EQ(lines, k.compile_defines.size());
}

}  // namespace
}  // namespace lmtune
