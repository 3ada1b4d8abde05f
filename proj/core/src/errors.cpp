// Copyright 2026 The lmtune Authors
// SPDX-License-Identifier: Apache-2.0

#include "lmtune/errors.hpp"

#include <sstream>

namespace lmtune {

namespace {

std::string join_violations(const std::vector<std::string>& violations) {
  std::string msg = "invalid kernel instance";
  for (std::size_t k = 0; k < violations.size(); ++k) {
    msg += (k == 0 ? ": " : "; ");
    msg += violations[k];
  }
  return msg;
}

std::string infeasible_message(std::size_t required, std::size_t capacity) {
  std::ostringstream os;
  os << "local-memory region of " << required << " bytes exceeds capacity of " << capacity
     << " bytes";
  return os.str();
}

std::string with_line(const std::string& what, std::size_t line) {
  if (line == 0) return what;
  return "line " + std::to_string(line) + ": " + what;
}

}  // namespace

ValidationError::ValidationError(std::vector<std::string> violations)
    : Error(join_violations(violations)), violations_(std::move(violations)) {}

OptimizationInfeasible::OptimizationInfeasible(std::size_t required_bytes,
                                               std::size_t capacity_bytes)
    : Error(infeasible_message(required_bytes, capacity_bytes)),
      required_(required_bytes),
      capacity_(capacity_bytes) {}

ParseError::ParseError(const std::string& what, std::size_t line)
    : Error(with_line(what, line)), line_(line) {}

}  // namespace lmtune
