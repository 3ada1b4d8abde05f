// Copyright 2026 The lmtune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lmtune/dataset.hpp"
#include "lmtune/forest.hpp"

namespace lmtune {

// Rows: model decision; columns: oracle decision (speedup > 1).
struct Confusion {
  std::int64_t optimize_beneficial = 0;
  std::int64_t optimize_not_beneficial = 0;
  std::int64_t skip_beneficial = 0;
  std::int64_t skip_not_beneficial = 0;

  std::int64_t total() const {
    return optimize_beneficial + optimize_not_beneficial + skip_beneficial + skip_not_beneficial;
  }
  friend bool operator==(const Confusion&, const Confusion&) = default;
};

struct EvalReport {
  double count_accuracy = 0.0;
  double penalty_weighted_accuracy = 0.0;
  double min_score = 0.0;
  double max_score = 0.0;
  std::int64_t n = 0;
  Confusion confusion;
};

// Score of one decision: 1 when it is optimal, otherwise the speedup of the
// chosen variant over the better one (1 stands for "do not optimize").
double decision_score(bool optimize, double speedup);

// Both throw Error on empty or length-mismatched input.
double count_accuracy(const std::vector<bool>& decisions, const std::vector<double>& speedups);
EvalReport evaluate(const std::vector<bool>& decisions, const std::vector<double>& speedups);

// Decisions of `forest` on `rows`, then evaluate().
EvalReport evaluate(const Forest& forest, const std::vector<LabeledInstance>& rows);

std::string format_report_text(const EvalReport& report);
std::string format_report_kv(const EvalReport& report);

struct HistogramBucket {
  double low = 0.0;  // -inf for the underflow bucket
  double high = 0.0;  // +inf for the overflow bucket
  std::int64_t count = 0;
};

// 2^-5, 2^-4, ..., 2^5.
std::vector<double> default_histogram_edges();

// Half-open buckets [e_k, e_k+1) plus underflow and overflow. Throws Error
// when edges are not strictly increasing or a speedup is NaN.
std::vector<HistogramBucket> speedup_histogram(const std::vector<double>& speedups,
                                               const std::vector<double>& edges);

// "bucket_low,bucket_high,count" header, then one line per bucket.
std::string format_histogram_csv(const std::vector<HistogramBucket>& buckets);

}  // namespace lmtune
