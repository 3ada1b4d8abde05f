// Copyright 2026 The lmtune Authors
// SPDX-License-Identifier: Apache-2.0

#include "lmtune/device.hpp"

#include <stdexcept>

#include "lmtune/kernel_model.hpp"

namespace lmtune {

namespace {

struct Field {
  std::string_view name;
  std::int64_t DeviceDescriptor::*member;
};

constexpr Field kFields[] = {
    {"transaction_bytes", &DeviceDescriptor::transaction_bytes},
    {"warp_size", &DeviceDescriptor::warp_size},
    {"element_bytes", &DeviceDescriptor::element_bytes},
    {"lmem_capacity_bytes", &DeviceDescriptor::lmem_capacity_bytes},
    {"max_warps_per_sm", &DeviceDescriptor::max_warps_per_sm},
    {"max_workgroups_per_sm", &DeviceDescriptor::max_workgroups_per_sm},
    {"register_file_per_sm", &DeviceDescriptor::register_file_per_sm},
    {"max_regs_per_thread", &DeviceDescriptor::max_regs_per_thread},
    {"dram_latency_cycles", &DeviceDescriptor::dram_latency_cycles},
    {"issue_cycles_per_op", &DeviceDescriptor::issue_cycles_per_op},
};

}  // namespace

std::vector<std::string> validate_device(const DeviceDescriptor& dev) {
  std::vector<std::string> out;
  for (const Field& f : kFields) {
    if (dev.*f.member <= 0) out.push_back("device." + std::string(f.name) + " must be > 0");
  }
  if (!is_power_of_two(dev.transaction_bytes)) {
    out.push_back("device.transaction_bytes must be a power of two");
  }
  if (!is_power_of_two(dev.warp_size)) out.push_back("device.warp_size must be a power of two");
  if (!is_power_of_two(dev.element_bytes)) {
    out.push_back("device.element_bytes must be a power of two");
  }
  if (dev.element_bytes > 0 && dev.transaction_bytes % dev.element_bytes != 0) {
    out.push_back("device.transaction_bytes must be a multiple of element_bytes");
  }
  return out;
}

bool set_device_field(DeviceDescriptor& dev, std::string_view key, std::int64_t value) {
  for (const Field& f : kFields) {
    if (f.name == key) {
      dev.*f.member = value;
      return true;
    }
  }
  return false;
}

const std::vector<std::string_view>& device_field_names() {
  static const std::vector<std::string_view> names = [] {
    std::vector<std::string_view> v;
    for (const Field& f : kFields) v.push_back(f.name);
    return v;
  }();
  return names;
}

std::int64_t get_device_field(const DeviceDescriptor& dev, std::string_view key) {
  for (const Field& f : kFields) {
    if (f.name == key) return dev.*f.member;
  }
  throw std::invalid_argument("unknown device field: " + std::string(key));
}

}  // namespace lmtune
