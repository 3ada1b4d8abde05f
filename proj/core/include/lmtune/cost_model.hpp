// Copyright 2026 The lmtune Authors
// SPDX-License-Identifier: Apache-2.0
//
// Deterministic analytical timing model used to label kernel instances.
//
// Per warp and work unit the model counts issue cycles C and DRAM
// transactions T, and combines them as
//
//   total = wus_per_workitem * ( max(C, T * issue) + T * dram_latency / active_warps )
//
// Baseline T covers every stencil read at its own coalescing degree plus the
// contextual accesses. The optimized variant replaces the stencil
// reads by its share of the cooperative copy and pays one issue cycle per
// local-memory read, while its extra registers and local memory can lower
// the number of active warps.

#pragma once

#include <cstdint>

#include "lmtune/access_analysis.hpp"
#include "lmtune/device.hpp"
#include "lmtune/kernel_model.hpp"

namespace lmtune {

struct ResourceUsage {
  std::int64_t regs_per_thread = 1;
  std::int64_t lmem_per_wg = 0;
  std::int64_t wg_size = 1;
  std::int64_t warps_per_wg = 1;
};

ResourceUsage make_usage(std::int64_t regs_per_thread, std::int64_t lmem_per_wg,
                         std::int64_t wg_size, const DeviceDescriptor& dev);

struct TimeEstimate {
  double compute_cycles = 0.0;
  double mem_transactions = 0.0;
  double active_warps = 0.0;
  double total_cycles = 0.0;
};

// Everything the timing formula consumes. Built from an instance by
// cost_terms(); tests perturb individual fields to probe sensitivities.
struct CostTerms {
  std::int64_t n = 1;
  std::int64_t m = 1;
  std::int64_t stencil_points = 1;
  double stencil_transactions = 1.0;  // per (i, j), summed over stencil points
  std::int64_t comp_ilb = 0;
  std::int64_t comp_ep = 0;
  std::int64_t coal_ilb = 0;
  std::int64_t uncoal_ilb = 0;
  std::int64_t coal_ep = 0;
  std::int64_t uncoal_ep = 0;
  std::int64_t wg_size = 1;
  std::int64_t wus_per_workitem = 1;
  std::int64_t baseline_regs = 1;
  std::int64_t optimized_regs = 1;
  std::int64_t lmem_bytes = 0;
  std::int64_t copy_transactions = 0;
};

// Baseline: 10 + stencil points + ceil(comp_ilb/4) + ceil(comp_ep/8)
//           + 2 * contextual accesses, clamped to [10, max_regs_per_thread].
// Optimized: the unclamped baseline count + 4, clamped the same way.
std::int64_t estimate_registers(const TemplateParams& params, Variant variant,
                                const DeviceDescriptor& dev);

// Resident warps per multiprocessor, at least 1.
double occupancy(const ResourceUsage& usage, const DeviceDescriptor& dev);

CostTerms cost_terms(const KernelInstance& instance, const DeviceDescriptor& dev);

// Throws OptimizationInfeasible for the optimized variant when the region
// does not fit in local memory.
TimeEstimate kernel_time(const CostTerms& terms, Variant variant, const DeviceDescriptor& dev);
TimeEstimate kernel_time(const KernelInstance& instance, Variant variant,
                         const DeviceDescriptor& dev);

// T_baseline / T_optimized; 0 when the optimization is infeasible.
double label_speedup(const CostTerms& terms, const DeviceDescriptor& dev);
double label_speedup(const KernelInstance& instance, const DeviceDescriptor& dev);

}  // namespace lmtune
