// Copyright 2026 The lmtune Authors
// SPDX-License-Identifier: Apache-2.0

#include "lmtune/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

#include "lmtune/errors.hpp"

namespace lmtune {

namespace {

void check_inputs(const std::vector<bool>& decisions, const std::vector<double>& speedups) {
  if (decisions.empty()) throw Error("evaluation needs at least one instance");
  if (decisions.size() != speedups.size()) {
    throw Error("decision count " + std::to_string(decisions.size()) + " != speedup count " +
                std::to_string(speedups.size()));
  }
}

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

double decision_score(bool optimize, double speedup) {
  if (optimize == (speedup > 1.0) || speedup == 1.0) return 1.0;
  const double chosen = optimize ? speedup : 1.0;
  return chosen / std::max(1.0, speedup);
}

double count_accuracy(const std::vector<bool>& decisions, const std::vector<double>& speedups) {
  check_inputs(decisions, speedups);
  std::int64_t hits = 0;
  for (std::size_t i = 0; i < decisions.size(); ++i) {
    if (decisions[i] == (speedups[i] > 1.0)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(decisions.size());
}

EvalReport evaluate(const std::vector<bool>& decisions, const std::vector<double>& speedups) {
  check_inputs(decisions, speedups);
  EvalReport r;
  r.n = static_cast<std::int64_t>(decisions.size());
  r.count_accuracy = count_accuracy(decisions, speedups);
  r.min_score = std::numeric_limits<double>::infinity();
  r.max_score = -std::numeric_limits<double>::infinity();
  double total = 0.0;
  for (std::size_t i = 0; i < decisions.size(); ++i) {
    const bool oracle = speedups[i] > 1.0;
    const double score = decision_score(decisions[i], speedups[i]);
    total += score;
    r.min_score = std::min(r.min_score, score);
    r.max_score = std::max(r.max_score, score);
    if (decisions[i]) {
      ++(oracle ? r.confusion.optimize_beneficial : r.confusion.optimize_not_beneficial);
    } else {
      ++(oracle ? r.confusion.skip_beneficial : r.confusion.skip_not_beneficial);
    }
  }
  r.penalty_weighted_accuracy = total / static_cast<double>(r.n);
  return r;
}

EvalReport evaluate(const Forest& forest, const std::vector<LabeledInstance>& rows) {
  std::vector<bool> decisions;
  std::vector<double> speedups;
  decisions.reserve(rows.size());
  speedups.reserve(rows.size());
  for (const LabeledInstance& row : rows) {
    decisions.push_back(forest.decide(row.features));
    speedups.push_back(row.speedup);
  }
  return evaluate(decisions, speedups);
}

std::string format_report_text(const EvalReport& r) {
  std::ostringstream os;
  os << "instances:                 " << r.n << '\n'
     << "count-based accuracy:      " << r.count_accuracy << '\n'
     << "penalty-weighted accuracy: " << r.penalty_weighted_accuracy << '\n'
     << "score range:               [" << r.min_score << ", " << r.max_score << "]\n"
     << "confusion (model x oracle):\n"
     << "                 beneficial  not-beneficial\n"
     << "  optimize       " << r.confusion.optimize_beneficial << "  "
     << r.confusion.optimize_not_beneficial << '\n'
     << "  do-not         " << r.confusion.skip_beneficial << "  "
     << r.confusion.skip_not_beneficial << '\n';
  return os.str();
}

std::string format_report_kv(const EvalReport& r) {
  std::string out;
  out += "n=" + std::to_string(r.n) + '\n';
  out += "count_accuracy=" + format_double(r.count_accuracy) + '\n';
  out += "penalty_weighted_accuracy=" + format_double(r.penalty_weighted_accuracy) + '\n';
  out += "min_score=" + format_double(r.min_score) + '\n';
  out += "max_score=" + format_double(r.max_score) + '\n';
  out += "confusion.optimize_beneficial=" + std::to_string(r.confusion.optimize_beneficial) + '\n';
  out += "confusion.optimize_not_beneficial=" +
         std::to_string(r.confusion.optimize_not_beneficial) + '\n';
  out += "confusion.skip_beneficial=" + std::to_string(r.confusion.skip_beneficial) + '\n';
  out += "confusion.skip_not_beneficial=" + std::to_string(r.confusion.skip_not_beneficial) + '\n';
  return out;
}

std::vector<double> default_histogram_edges() {
  std::vector<double> edges;
  for (int e = -5; e <= 5; ++e) edges.push_back(std::ldexp(1.0, e));
  return edges;
}

std::vector<HistogramBucket> speedup_histogram(const std::vector<double>& speedups,
                                               const std::vector<double>& edges) {
  for (std::size_t k = 1; k < edges.size(); ++k) {
    if (!(edges[k - 1] < edges[k])) throw Error("histogram edges must be strictly increasing");
  }
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<HistogramBucket> buckets;
  double low = -inf;
  for (double e : edges) {
    buckets.push_back(HistogramBucket{low, e, 0});
    low = e;
  }
  buckets.push_back(HistogramBucket{low, inf, 0});
  for (double s : speedups) {
    if (std::isnan(s)) throw Error("NaN speedup in histogram input");
    const auto k = std::upper_bound(edges.begin(), edges.end(), s) - edges.begin();
    ++buckets[static_cast<std::size_t>(k)].count;
  }
  return buckets;
}

std::string format_histogram_csv(const std::vector<HistogramBucket>& buckets) {
  std::string out = "bucket_low,bucket_high,count\n";
  for (const HistogramBucket& b : buckets) {
    out += format_double(b.low) + ',' + format_double(b.high) + ',' + std::to_string(b.count) +
           '\n';
  }
  return out;
}

}  // namespace lmtune
