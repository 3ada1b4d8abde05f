// Copyright 2026 The lmtune Authors
// SPDX-License-Identifier: Apache-2.0

#include "lmtune/cost_model.hpp"

#include <algorithm>

#include "lmtune/codegen.hpp"
#include "lmtune/errors.hpp"

namespace lmtune {

namespace {

std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

constexpr std::int64_t kBaseRegisters = 10;
constexpr std::int64_t kCopyBookkeepingRegisters = 4;

}  // namespace

ResourceUsage make_usage(std::int64_t regs_per_thread, std::int64_t lmem_per_wg,
                         std::int64_t wg_size, const DeviceDescriptor& dev) {
  return {regs_per_thread, lmem_per_wg, wg_size, ceil_div(wg_size, dev.warp_size)};
}

std::int64_t estimate_registers(const TemplateParams& params, Variant variant,
                                const DeviceDescriptor& dev) {
  const auto points = static_cast<std::int64_t>(stencil_offsets(params.stencil).size());
  std::int64_t regs = kBaseRegisters + points + ceil_div(params.num_comp_ilb, 4) +
                      ceil_div(params.num_comp_ep, 8) + 2 * params.num_ctx_accesses();
  if (variant == Variant::kOptimized) regs += kCopyBookkeepingRegisters;
  return std::clamp(regs, kBaseRegisters, dev.max_regs_per_thread);
}

double occupancy(const ResourceUsage& usage, const DeviceDescriptor& dev) {
  std::int64_t groups = dev.max_workgroups_per_sm;
  if (usage.lmem_per_wg > 0) groups = std::min(groups, dev.lmem_capacity_bytes / usage.lmem_per_wg);
  groups = std::min(groups, dev.register_file_per_sm / (usage.regs_per_thread * usage.wg_size));
  groups = std::min(groups, dev.max_warps_per_sm / usage.warps_per_wg);
  return static_cast<double>(std::max<std::int64_t>(groups * usage.warps_per_wg, 1));
}

CostTerms cost_terms(const KernelInstance& instance, const DeviceDescriptor& dev) {
  require_valid(instance);
  const TemplateParams& p = instance.params;
  const LaunchConfig& l = instance.launch;
  const Footprint fp = footprint(instance, dev);

  CostTerms t;
  t.n = p.n;
  t.m = p.m;
  t.stencil_points = static_cast<std::int64_t>(stencil_offsets(p.stencil).size());
  t.stencil_transactions = stencil_transactions(instance, dev);
  t.comp_ilb = p.num_comp_ilb;
  t.comp_ep = p.num_comp_ep;
  t.coal_ilb = p.num_coal_ilb;
  t.uncoal_ilb = p.num_uncoal_ilb;
  t.coal_ep = p.num_coal_ep;
  t.uncoal_ep = p.num_uncoal_ep;
  t.wg_size = l.wg_size();
  t.wus_per_workitem = num_wus_x(l, p) * num_wus_y(l, p);
  t.baseline_regs = estimate_registers(p, Variant::kBaseline, dev);
  t.optimized_regs = estimate_registers(p, Variant::kOptimized, dev);
  t.lmem_bytes = fp.bytes;
  t.copy_transactions = copy_transaction_count(fp, dev);
  return t;
}

TimeEstimate kernel_time(const CostTerms& t, Variant variant, const DeviceDescriptor& dev) {
  const double issue = static_cast<double>(dev.issue_cycles_per_op);
  const double ws = static_cast<double>(dev.warp_size);
  const double iterations = static_cast<double>(t.n * t.m);

  const double ctx_ilb = static_cast<double>(t.coal_ilb) + static_cast<double>(t.uncoal_ilb) * ws;
  const double ctx_ep = static_cast<double>(t.coal_ep) + static_cast<double>(t.uncoal_ep) * ws;

  TimeEstimate est;
  est.compute_cycles = issue * (static_cast<double>(t.comp_ilb) * iterations +
                                static_cast<double>(t.comp_ep));
  ResourceUsage usage;
  if (variant == Variant::kBaseline) {
    est.mem_transactions =
        iterations * (t.stencil_transactions + ctx_ilb) +
        ctx_ep;
    usage = make_usage(t.baseline_regs, 0, t.wg_size, dev);
  } else {
    if (t.lmem_bytes > dev.lmem_capacity_bytes) {
      throw OptimizationInfeasible(static_cast<std::size_t>(t.lmem_bytes),
                                   static_cast<std::size_t>(dev.lmem_capacity_bytes));
    }
    usage = make_usage(t.optimized_regs, t.lmem_bytes, t.wg_size, dev);
    est.mem_transactions = static_cast<double>(t.copy_transactions) /
                               static_cast<double>(usage.warps_per_wg) +
                           iterations * ctx_ilb + ctx_ep;
    est.compute_cycles += static_cast<double>(t.stencil_points) * iterations;
  }
  est.active_warps = occupancy(usage, dev);
  const double latency = static_cast<double>(dev.dram_latency_cycles);
  est.total_cycles =
      static_cast<double>(t.wus_per_workitem) *
      (std::max(est.compute_cycles, est.mem_transactions * issue) +
       est.mem_transactions * latency / est.active_warps);
  return est;
}

TimeEstimate kernel_time(const KernelInstance& instance, Variant variant,
                         const DeviceDescriptor& dev) {
  return kernel_time(cost_terms(instance, dev), variant, dev);
}

double label_speedup(const CostTerms& terms, const DeviceDescriptor& dev) {
  if (terms.lmem_bytes > dev.lmem_capacity_bytes) return 0.0;
  const double base = kernel_time(terms, Variant::kBaseline, dev).total_cycles;
  const double opt = kernel_time(terms, Variant::kOptimized, dev).total_cycles;
  return base / opt;
}

double label_speedup(const KernelInstance& instance, const DeviceDescriptor& dev) {
  return label_speedup(cost_terms(instance, dev), dev);
}

}  // namespace lmtune
