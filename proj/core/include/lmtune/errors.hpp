// Copyright 2026 The lmtune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace lmtune {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An instance violates one or more TemplateParams / LaunchConfig invariants.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<std::string> violations);
  const std::vector<std::string>& violations() const { return violations_; }

 private:
  std::vector<std::string> violations_;
};

// The cached region does not fit in local memory.
class OptimizationInfeasible : public Error {
 public:
  OptimizationInfeasible(std::size_t required_bytes, std::size_t capacity_bytes);
  std::size_t required_bytes() const { return required_; }
  std::size_t capacity_bytes() const { return capacity_; }

 private:
  std::size_t required_;
  std::size_t capacity_;
};

// Malformed text input (dataset, model, config, instance description).
// line() is 1-based, 0 when not applicable.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class SchemaError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace lmtune
