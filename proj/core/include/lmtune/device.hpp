// Copyright 2026 The lmtune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace lmtune {

// Memory-system and occupancy constants of the modeled GPU. Defaults describe a
// compute-capability 2.0 part (128-byte DRAM segments, 32-lane warps, 48 KB of
// local memory, 32K registers per multiprocessor).
struct DeviceDescriptor {
  std::int64_t transaction_bytes = 128;
  std::int64_t warp_size = 32;
  std::int64_t element_bytes = 4;
  std::int64_t lmem_capacity_bytes = 48 * 1024;
  std::int64_t max_warps_per_sm = 48;
  std::int64_t max_workgroups_per_sm = 8;
  std::int64_t register_file_per_sm = 32768;
  std::int64_t max_regs_per_thread = 63;
  std::int64_t dram_latency_cycles = 400;
  std::int64_t issue_cycles_per_op = 4;

  // Elements per DRAM segment.
  std::int64_t segment_elems() const { return transaction_bytes / element_bytes; }

  friend bool operator==(const DeviceDescriptor&, const DeviceDescriptor&) = default;
};

std::vector<std::string> validate_device(const DeviceDescriptor& dev);

// Field access by config key ("transaction_bytes", "warp_size", ...).
// set_device_field returns false for an unknown key.
bool set_device_field(DeviceDescriptor& dev, std::string_view key, std::int64_t value);
const std::vector<std::string_view>& device_field_names();
std::int64_t get_device_field(const DeviceDescriptor& dev, std::string_view key);

}  // namespace lmtune
