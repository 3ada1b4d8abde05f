// Copyright 2026 The lmtune Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "lmtune/errors.hpp"
#include "lmtune/kernel_model.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace lmtune {
namespace {

using testing::make_instance;

bool contains(const std::vector<std::string>& v, const std::string& s) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

TEST(StencilOffsets, PointCounts) {
  EXPECT_EQ(stencil_offsets({StencilShape::kRectangular, 1}).size(), 9u);
  EXPECT_EQ(stencil_offsets({StencilShape::kDiamond, 1}).size(), 5u);
  EXPECT_EQ(stencil_offsets({StencilShape::kStar, 2}).size(), 9u);
  EXPECT_EQ(stencil_offsets({StencilShape::kRectangular, 2}).size(), 25u);
  EXPECT_EQ(stencil_offsets({StencilShape::kDiamond, 2}).size(), 13u);
  for (StencilShape s : kAllShapes) {
    EXPECT_EQ(stencil_offsets({s, 0}), std::vector<Offset>{Offset{}});
  }
}

TEST(StencilOffsets, ContainOriginAndAreSymmetric) {
  for (StencilShape s : kAllShapes) {
    for (int r = 0; r <= 4; ++r) {
      const auto offsets = stencil_offsets({s, r});
      EXPECT_NE(std::find(offsets.begin(), offsets.end(), Offset{0, 0}), offsets.end());
      for (const Offset& o : offsets) {
        EXPECT_NE(std::find(offsets.begin(), offsets.end(), Offset{-o.d_row, o.d_col}),
                  offsets.end());
        EXPECT_NE(std::find(offsets.begin(), offsets.end(), Offset{o.d_row, -o.d_col}),
                  offsets.end());
      }
      EXPECT_TRUE(std::is_sorted(offsets.begin(), offsets.end(), [](Offset a, Offset b) {
        return a.d_row != b.d_row ? a.d_row < b.d_row : a.d_col < b.d_col;
      }));
    }
  }
}

TEST(StencilOffsets, ExtentMatchesOffsets) {
  for (StencilShape s : kAllShapes) {
    for (int r = 0; r <= 3; ++r) {
      const auto offsets = stencil_offsets({s, r});
      const OffsetExtent e = offset_extent({s, r});
      int min_row = 0, max_row = 0, min_col = 0, max_col = 0;
      for (const Offset& o : offsets) {
        min_row = std::min(min_row, o.d_row);
        max_row = std::max(max_row, o.d_row);
        min_col = std::min(min_col, o.d_col);
        max_col = std::max(max_col, o.d_col);
      }
      EXPECT_EQ(e.min_row, min_row);
      EXPECT_EQ(e.max_row, max_row);
      EXPECT_EQ(e.min_col, min_col);
      EXPECT_EQ(e.max_col, max_col);
    }
  }
}

TEST(HomeCoordinate, Examples) {
  TemplateParams p;
  EXPECT_EQ(home_coordinate(HomeAccessPattern::kXYReuse, Coord::xy(5, 7), 3, 4, p), (Coord{3, 4}));
  EXPECT_EQ(home_coordinate(HomeAccessPattern::kYReuseRow, Coord::xy(6, 2), 0, 9, p),
            (Coord{6, 9}));
  p.n = 4;
  p.m = 8;
  EXPECT_EQ(home_coordinate(HomeAccessPattern::kNoReuseRowMajor, Coord::xy(2, 3), 1, 5, p),
            (Coord{13, 21}));
}

TEST(HomeCoordinate, MatchesPatternTableOnRandomInputs) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::int64_t> d(0, 300);
  for (int k = 0; k < 2000; ++k) {
    TemplateParams p;
    p.pattern = kAllPatterns[static_cast<std::size_t>(k % 7)];
    p.n = 1 + d(rng) % 64;
    p.m = 1 + d(rng) % 64;
    const std::int64_t wx = d(rng), wy = d(rng), i = d(rng) % p.n, j = d(rng) % p.m;
    EXPECT_EQ(home_coordinate(p.pattern, Coord::xy(wx, wy), i, j, p),
              oracle::home(p, wx, wy, i, j));
  }
}

TEST(HomeCoordinate, IgnoresUnlistedInputs) {
  TemplateParams p;
  p.n = 8;
  p.m = 8;
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::int64_t> d(0, 1000);
  for (int k = 0; k < 500; ++k) {
    const std::int64_t wx = d(rng), wy = d(rng), i = d(rng) % 8, j = d(rng) % 8;
    const std::int64_t wx2 = d(rng), wy2 = d(rng), i2 = d(rng) % 8;
    using P = HomeAccessPattern;
    EXPECT_EQ(home_coordinate(P::kXYReuse, Coord::xy(wx, wy), i, j, p),
              home_coordinate(P::kXYReuse, Coord::xy(wx2, wy2), i, j, p));
    EXPECT_EQ(home_coordinate(P::kXReuseRow, Coord::xy(wx, wy), i, j, p),
              home_coordinate(P::kXReuseRow, Coord::xy(wx2, wy), i2, j, p));
    EXPECT_EQ(home_coordinate(P::kXReuseCol, Coord::xy(wx, wy), i, j, p),
              home_coordinate(P::kXReuseCol, Coord::xy(wx2, wy), i2, j, p));
    EXPECT_EQ(home_coordinate(P::kYReuseRow, Coord::xy(wx, wy), i, j, p),
              home_coordinate(P::kYReuseRow, Coord::xy(wx, wy2), i2, j, p));
    EXPECT_EQ(home_coordinate(P::kYReuseCol, Coord::xy(wx, wy), i, j, p),
              home_coordinate(P::kYReuseCol, Coord::xy(wx, wy2), i2, j, p));
    // Repeated calls are identical.
    EXPECT_EQ(home_coordinate(P::kNoReuseColMajor, Coord::xy(wx, wy), i, j, p),
              home_coordinate(P::kNoReuseColMajor, Coord::xy(wx, wy), i, j, p));
  }
}

TEST(WorkUnit, Examples) {
  const KernelInstance origin = make_instance(HomeAccessPattern::kXYReuse, 8, 8,
                                              StencilShape::kRectangular, 0, 16, 16);
  EXPECT_EQ(work_unit_for(origin.launch, origin.params, Coord{}, Coord{}, Coord{}), (Coord{0, 0}));
  const Coord wu =
      work_unit_for(origin.launch, origin.params, Coord::xy(1, 0), Coord::xy(3, 0), Coord::xy(2, 0));
  EXPECT_EQ(wu.x(), 99);
  EXPECT_EQ(wu.y(), 0);
  EXPECT_EQ(num_wus_x(origin.launch, origin.params), 4);
}

TEST(WorkUnit, IsBijectionOntoOutputGrid) {
  for (std::int64_t out : {8, 16, 32}) {
    for (std::int64_t gx = 1; gx <= out; gx *= 2) {
      for (std::int64_t gy = 1; gy <= out; gy *= 2) {
        for (std::int64_t wx = 1; wx <= gx; wx *= 2) {
          for (std::int64_t wy = 1; wy <= gy; wy *= 2) {
            KernelInstance inst;
            inst.params.out_w = inst.params.out_h = out;
            inst.launch = {gx, gy, wx, wy};
            const std::int64_t nx = num_wus_x(inst.launch, inst.params);
            const std::int64_t ny = num_wus_y(inst.launch, inst.params);
            std::vector<int> hits(static_cast<std::size_t>(out * out), 0);
            for (std::int64_t bx = 0; bx < gx / wx; ++bx)
              for (std::int64_t by = 0; by < gy / wy; ++by)
                for (std::int64_t ix = 0; ix < wx; ++ix)
                  for (std::int64_t iy = 0; iy < wy; ++iy)
                    for (std::int64_t tx = 0; tx < nx; ++tx)
                      for (std::int64_t ty = 0; ty < ny; ++ty) {
                        const Coord wu =
                            work_unit_for(inst.launch, inst.params, Coord::xy(bx, by),
                                          Coord::xy(ix, iy), Coord::xy(tx, ty));
                        ASSERT_EQ(wu, oracle::work_unit(inst, bx, by, ix, iy, tx, ty));
                        ASSERT_GE(wu.row, 0);
                        ASSERT_LT(wu.row, out);
                        ASSERT_GE(wu.col, 0);
                        ASSERT_LT(wu.col, out);
                        ++hits[static_cast<std::size_t>(wu.row * out + wu.col)];
                      }
            EXPECT_TRUE(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }))
                << "out " << out << " grid " << gx << "x" << gy << " wg " << wx << "x" << wy;
          }
        }
      }
    }
  }
}

TEST(Validation, AcceptsLargestWorkgroup) {
  const auto inst =
      make_instance(HomeAccessPattern::kXYReuse, 8, 8, StencilShape::kRectangular, 1, 32, 32);
  EXPECT_TRUE(validate_instance(inst).empty());
  EXPECT_NO_THROW(require_valid(inst));
}

TEST(Validation, NamesViolations) {
  auto inst =
      make_instance(HomeAccessPattern::kXYReuse, 8, 8, StencilShape::kRectangular, 1, 64, 32);
  EXPECT_TRUE(contains(validate_instance(inst), "workgroup size 2048 > 1024"));
  inst = make_instance(HomeAccessPattern::kXYReuse, 8, 8, StencilShape::kRectangular, 1, 8, 8, 16,
                       16);
  EXPECT_TRUE(contains(validate_instance(inst), "grid size 256 < 512"));
  inst = make_instance(HomeAccessPattern::kXYReuse, 8, 8, StencilShape::kRectangular, 1, 12, 8);
  EXPECT_TRUE(contains(validate_instance(inst), "wg_x 12 is not a power of two"));
  inst = make_instance(HomeAccessPattern::kXYReuse, 8, 8, StencilShape::kRectangular, 1, 8, 8,
                       4096, 512);
  EXPECT_TRUE(contains(validate_instance(inst), "grid_x 4096 does not divide out_w 2048"));
  inst = make_instance(HomeAccessPattern::kXYReuse, 0, 8, StencilShape::kRectangular, -1, 8, 8);
  inst.params.num_comp_ilb = -2;
  const auto v = validate_instance(inst);
  EXPECT_TRUE(contains(v, "n 0 < 1"));
  EXPECT_TRUE(contains(v, "stencil radius -1 < 0"));
  EXPECT_TRUE(contains(v, "num_comp_ilb -2 < 0"));
  try {
    require_valid(inst);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.violations(), v);
  }
}

TEST(Names, RoundTrip) {
  for (HomeAccessPattern p : kAllPatterns) EXPECT_EQ(parse_pattern(to_string(p)), p);
  for (StencilShape s : kAllShapes) EXPECT_EQ(parse_shape(to_string(s)), s);
  EXPECT_FALSE(parse_pattern("diagonal").has_value());
  EXPECT_FALSE(parse_shape("cross").has_value());
}

TEST(InstanceKey, DistinguishesEveryField) {
  const auto base =
      make_instance(HomeAccessPattern::kXYReuse, 8, 16, StencilShape::kRectangular, 1, 16, 16);
  std::set<std::string> keys{instance_key(base)};
  auto add = [&](auto mutate) {
    KernelInstance k = base;
    mutate(k);
    EXPECT_TRUE(keys.insert(instance_key(k)).second) << instance_key(k);
  };
  add([](KernelInstance& k) { k.params.pattern = HomeAccessPattern::kXReuseRow; });
  add([](KernelInstance& k) { k.params.n = 16; });
  add([](KernelInstance& k) { k.params.m = 8; });
  add([](KernelInstance& k) { k.params.stencil.shape = StencilShape::kStar; });
  add([](KernelInstance& k) { k.params.stencil.radius = 2; });
  add([](KernelInstance& k) { k.params.num_comp_ilb = 3; });
  add([](KernelInstance& k) { k.params.num_comp_ep = 3; });
  add([](KernelInstance& k) { k.params.num_coal_ilb = 3; });
  add([](KernelInstance& k) { k.params.num_coal_ep = 3; });
  add([](KernelInstance& k) { k.params.num_uncoal_ilb = 3; });
  add([](KernelInstance& k) { k.params.num_uncoal_ep = 3; });
  add([](KernelInstance& k) { k.params.in_h = 1024; });
  add([](KernelInstance& k) { k.params.in_w = 1024; });
  add([](KernelInstance& k) { k.params.out_h = 1024; });
  add([](KernelInstance& k) { k.params.out_w = 1024; });
  add([](KernelInstance& k) { k.launch.grid_x = 1024; });
  add([](KernelInstance& k) { k.launch.grid_y = 1024; });
  add([](KernelInstance& k) { k.launch.wg_x = 8; });
  add([](KernelInstance& k) { k.launch.wg_y = 8; });
}

}  // namespace
}  // namespace lmtune
