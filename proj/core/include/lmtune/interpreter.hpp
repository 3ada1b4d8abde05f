// Copyright 2026 The lmtune Authors
// SPDX-License-Identifier: Apache-2.0
//
// Reference interpreter for the OpenCL C subset produced by codegen.
//
// A workgroup executes in SIMT lockstep: every statement runs for all lanes
// under an active mask, so per-warp global transactions can be counted exactly
// as the hardware would issue them. Local memory accesses are checked for
// races between barriers, and a barrier reached by only part of the workgroup
// is an error.
//
// Supported: one __kernel with __global float* parameters, int/float scalar
// declarations, a single-dimension __local float array, for loops, barrier,
// assignments (=, +=), + - * / % and comparisons, get_group_id, get_local_id
// and fma. Macros come from the KernelSource defines.

#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "lmtune/codegen.hpp"
#include "lmtune/device.hpp"
#include "lmtune/kernel_model.hpp"

namespace lmtune {

using BufferMap = std::map<std::string, std::vector<float>>;

struct ArrayTraffic {
  std::int64_t warp_accesses = 0;  // warp-level access instructions
  std::int64_t transactions = 0;   // DRAM segments touched, summed over them
};

struct ExecutionStats {
  std::map<std::string, ArrayTraffic> global_reads;
  std::map<std::string, ArrayTraffic> global_writes;
  std::int64_t local_reads = 0;  // lane-level
  std::int64_t local_writes = 0;
  std::int64_t barriers = 0;  // per workgroup, summed
};

class CompiledKernel {
 public:
  // Throws ParseError for source outside the supported subset.
  explicit CompiledKernel(const KernelSource& source);
  ~CompiledKernel();
  CompiledKernel(CompiledKernel&&) noexcept;
  CompiledKernel& operator=(CompiledKernel&&) noexcept;

  const std::string& name() const;
  // Buffer parameter names in declaration order.
  const std::vector<std::string>& parameters() const;
  // Elements of the __local array, 0 when none is declared.
  std::int64_t local_elements() const;

  // Runs every workgroup of `launch` in order. Each parameter must name an
  // entry of `buffers`. Throws Error on out-of-bounds access, local-memory
  // races, reads of unwritten local memory and divergent barriers.
  ExecutionStats run(const LaunchConfig& launch, BufferMap& buffers,
                     const DeviceDescriptor& dev = {}) const;

  struct Impl;

 private:
  std::unique_ptr<Impl> impl_;
};

// Buffers large enough for every access `source` makes when emitted for
// `instance`: `in` covers the padded target array up to the largest home
// coordinate plus apron and copy alignment, `in2` the contextual reads, `out`
// the output array. Inputs hold deterministic pseudo-random values in
// [0.5, 1.5) derived from `seed`; `out` is zero.
BufferMap make_buffers(const KernelInstance& instance, const KernelSource& source,
                       std::uint64_t seed);

}  // namespace lmtune
