// Copyright 2026 The lmtune Authors
// SPDX-License-Identifier: Apache-2.0

#include "lmtune/forest.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "lmtune/errors.hpp"

namespace lmtune {

namespace {

// Candidates whose gain is within this relative distance of the best are
// tied; the lowest (feature, threshold) wins.
constexpr double kTieTolerance = 1e-9;
// Gains at or below this fraction of the node's sum of squares are no split.
constexpr double kMinRelativeGain = 1e-12;

struct Candidate {
  int feature;
  double threshold;
  double gain;
};

class TreeBuilder {
 public:
  TreeBuilder(const std::vector<FeatureVector>& x, const std::vector<double>& y,
              const Hyperparams& hp, std::mt19937_64& rng)
      : x_(x), y_(y), hp_(hp), rng_(rng) {}

  Tree build(std::vector<std::size_t> idx) {
    grow(idx, 0);
    return std::move(tree_);
  }

 private:
  const std::vector<FeatureVector>& x_;
  const std::vector<double>& y_;
  const Hyperparams& hp_;
  std::mt19937_64& rng_;
  Tree tree_;
  std::vector<std::pair<double, double>> sorted_;

  int grow(std::vector<std::size_t>& idx, int depth) {
    const auto n = static_cast<double>(idx.size());
    double sum = 0.0;
    for (std::size_t i : idx) sum += y_[i];
    const double mean = sum / n;
    double sse = 0.0;
    for (std::size_t i : idx) sse += (y_[i] - mean) * (y_[i] - mean);

    const auto [lo, hi] = std::minmax_element(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return y_[a] < y_[b];
    });
    const bool constant = y_[*lo] == y_[*hi];

    const int node = static_cast<int>(tree_.nodes.size());
    // A constant node keeps its exact value rather than a rounded mean.
    tree_.nodes.push_back(TreeNode{-1, 0.0, constant ? y_[*lo] : mean, -1, -1});
    const auto min_leaf = static_cast<std::size_t>(hp_.min_samples_leaf);
    if (idx.size() < 2 * min_leaf || (hp_.max_depth > 0 && depth >= hp_.max_depth) ||
        constant || sse <= 0.0) {
      return node;
    }

    std::array<int, kNumFeatures> order{};
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng_);

    // Draw features_per_node features; keep drawing while none of them
    // yields a positive gain.
    std::vector<Candidate> candidates;
    double best = 0.0;
    const double min_gain = kMinRelativeGain * sse;
    int evaluated = 0;
    for (int f : order) {
      evaluate(idx, f, candidates, best);
      ++evaluated;
      if (evaluated >= hp_.features_per_node && best > min_gain) break;
    }
    if (best <= min_gain) return node;

    const Candidate* pick = nullptr;
    for (const Candidate& c : candidates) {
      if (c.gain < best - kTieTolerance * best) continue;
      if (pick == nullptr || c.feature < pick->feature ||
          (c.feature == pick->feature && c.threshold < pick->threshold)) {
        pick = &c;
      }
    }
    const int feature = pick->feature;
    const double threshold = pick->threshold;

    std::vector<std::size_t> left;
    std::vector<std::size_t> right;
    for (std::size_t i : idx) {
      (x_[i].values[static_cast<std::size_t>(feature)] <= threshold ? left : right).push_back(i);
    }
    idx.clear();
    idx.shrink_to_fit();
    const int l = grow(left, depth + 1);
    const int r = grow(right, depth + 1);
    TreeNode& nd = tree_.nodes[static_cast<std::size_t>(node)];
    nd.feature = feature;
    nd.threshold = threshold;
    nd.value = 0.0;  // only leaves carry a value, matching the model file
    nd.left = l;
    nd.right = r;
    return node;
  }

  // Every split between consecutive distinct values of feature f that leaves
  // at least min_samples_leaf rows on each side.
  void evaluate(const std::vector<std::size_t>& idx, int f, std::vector<Candidate>& out,
                double& best) {
    sorted_.clear();
    for (std::size_t i : idx) sorted_.emplace_back(x_[i].values[static_cast<std::size_t>(f)], y_[i]);
    std::sort(sorted_.begin(), sorted_.end());
    const std::size_t n = sorted_.size();
    double total = 0.0;
    for (const auto& p : sorted_) total += p.second;
    const auto min_leaf = static_cast<std::size_t>(hp_.min_samples_leaf);
    double left_sum = 0.0;
    for (std::size_t k = 1; k < n; ++k) {
      left_sum += sorted_[k - 1].second;
      const double a = sorted_[k - 1].first;
      const double b = sorted_[k].first;
      if (a == b || k < min_leaf || n - k < min_leaf) continue;
      const auto nl = static_cast<double>(k);
      const auto nr = static_cast<double>(n - k);
      const double diff = left_sum / nl - (total - left_sum) / nr;
      const double gain = nl * nr / static_cast<double>(n) * diff * diff;
      double mid = a + (b - a) / 2.0;
      if (!(mid < b)) mid = a;
      out.push_back(Candidate{f, mid, gain});
      best = std::max(best, gain);
    }
  }
};

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

std::vector<std::string> validate_hyperparams(const Hyperparams& hp) {
  std::vector<std::string> out;
  if (hp.num_trees < 1) out.push_back("num_trees must be >= 1");
  if (hp.features_per_node < 1 || hp.features_per_node > static_cast<int>(kNumFeatures)) {
    out.push_back("features_per_node must be in [1, 18]");
  }
  if (hp.max_depth < 0) out.push_back("max_depth must be >= 0");
  if (hp.min_samples_leaf < 1) out.push_back("min_samples_leaf must be >= 1");
  return out;
}

double training_target(double speedup) {
  if (!(speedup > 0.0)) return kLog2Floor;
  return std::max(std::log2(speedup), kLog2Floor);
}

double Tree::predict(const FeatureVector& x) const {
  std::size_t k = 0;
  while (!nodes[k].is_leaf()) {
    const TreeNode& nd = nodes[k];
    k = static_cast<std::size_t>(x.values[static_cast<std::size_t>(nd.feature)] <= nd.threshold
                                     ? nd.left
                                     : nd.right);
  }
  return nodes[k].value;
}

Forest::Forest(Hyperparams hp, std::vector<Tree> trees)
    : hp_(hp), trees_(std::move(trees)), schema_(kFeatureNames.begin(), kFeatureNames.end()) {}

double Forest::predict_log2(const FeatureVector& x) const {
  if (trees_.empty()) throw Error("forest has no trees");
  std::vector<double> leaves;
  leaves.reserve(trees_.size());
  for (const Tree& t : trees_) leaves.push_back(t.predict(x));
  std::sort(leaves.begin(), leaves.end());
  double sum = 0.0;
  for (double v : leaves) sum += v;
  return sum / static_cast<double>(leaves.size());
}

double Forest::predict(const FeatureVector& x) const { return std::exp2(predict_log2(x)); }

std::array<std::int64_t, kNumFeatures> Forest::split_counts() const {
  std::array<std::int64_t, kNumFeatures> counts{};
  for (const Tree& t : trees_) {
    for (const TreeNode& nd : t.nodes) {
      if (!nd.is_leaf()) ++counts[static_cast<std::size_t>(nd.feature)];
    }
  }
  return counts;
}

Forest train(const std::vector<FeatureVector>& x, const std::vector<double>& targets,
             const Hyperparams& hp, int threads, TrainReport* report) {
  if (auto v = validate_hyperparams(hp); !v.empty()) throw TrainingError(v.front());
  if (x.size() != targets.size()) throw TrainingError("feature and target counts differ");
  if (x.size() < 2) throw TrainingError("training needs at least two rows");
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(targets[i])) throw TrainingError("non-finite target in row " + std::to_string(i));
    for (double v : x[i].values) {
      if (!std::isfinite(v)) throw TrainingError("non-finite feature in row " + std::to_string(i));
    }
  }

  const std::size_t n = x.size();
  const auto num_trees = static_cast<std::size_t>(hp.num_trees);
  std::vector<Tree> trees(num_trees);
  std::vector<std::vector<std::uint8_t>> in_bag(num_trees);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t t = next++; t < num_trees; t = next++) {
      std::mt19937_64 rng(mix_seed(hp.seed, t));
      std::vector<std::size_t> idx(n);
      if (hp.bootstrap) {
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        for (auto& i : idx) i = pick(rng);
        in_bag[t].assign(n, 0);
        for (std::size_t i : idx) in_bag[t][i] = 1;
      } else {
        std::iota(idx.begin(), idx.end(), std::size_t{0});
      }
      TreeBuilder builder(x, targets, hp, rng);
      trees[t] = builder.build(std::move(idx));
    }
  };
  unsigned workers = threads > 0 ? static_cast<unsigned>(threads)
                                 : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, num_trees));
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  if (report != nullptr) {
    report->oob_mse.clear();
    if (hp.bootstrap) {
      std::vector<double> sum(n, 0.0);
      std::vector<int> count(n, 0);
      for (std::size_t t = 0; t < num_trees; ++t) {
        for (std::size_t i = 0; i < n; ++i) {
          if (in_bag[t][i]) continue;
          sum[i] += trees[t].predict(x[i]);
          ++count[i];
        }
        double se = 0.0;
        std::size_t covered = 0;
        for (std::size_t i = 0; i < n; ++i) {
          if (count[i] == 0) continue;
          const double d = sum[i] / count[i] - targets[i];
          se += d * d;
          ++covered;
        }
        report->oob_mse.push_back(covered > 0 ? se / static_cast<double>(covered) : 0.0);
      }
    }
  }
  return Forest(hp, std::move(trees));
}

Forest train(const std::vector<LabeledInstance>& rows, const Hyperparams& hp, int threads,
             TrainReport* report) {
  std::vector<FeatureVector> x;
  std::vector<double> y;
  x.reserve(rows.size());
  y.reserve(rows.size());
  for (const LabeledInstance& r : rows) {
    x.push_back(r.features);
    y.push_back(training_target(r.speedup));
  }
  return train(x, y, hp, threads, report);
}

// ---------------------------------------------------------------- model file

namespace {

constexpr const char* kMagic = "lmtune-forest 1";

void format_tree(const Tree& t, std::size_t k, std::string& out) {
  const TreeNode& nd = t.nodes[k];
  if (nd.is_leaf()) {
    out += "leaf " + format_double(nd.value) + '\n';
    return;
  }
  out += "node " + std::to_string(nd.feature) + ' ' + format_double(nd.threshold) + '\n';
  format_tree(t, static_cast<std::size_t>(nd.left), out);
  format_tree(t, static_cast<std::size_t>(nd.right), out);
}

class ModelReader {
 public:
  explicit ModelReader(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) lines_.push_back(line);
  }

  std::size_t line_no() const { return pos_; }
  bool done() const { return pos_ >= lines_.size(); }

  std::vector<std::string> next(const std::string& context) {
    if (done()) throw ParseError("unexpected end of model file (" + context + ")", pos_ + 1);
    std::istringstream ls(lines_[pos_++]);
    std::vector<std::string> words;
    for (std::string w; ls >> w;) words.push_back(w);
    if (words.empty()) throw ParseError("blank line (" + context + ")", pos_);
    return words;
  }

  std::string raw_next(const std::string& context) {
    if (done()) throw ParseError("unexpected end of model file (" + context + ")", pos_ + 1);
    return lines_[pos_++];
  }

  [[noreturn]] void fail(const std::string& what) const { throw ParseError(what, pos_); }

  template <typename T>
  T number(const std::string& s, const std::string& context) const {
    T v{};
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
      fail("bad number '" + s + "' (" + context + ")");
    }
    return v;
  }

  std::int64_t keyed(const std::string& key) {
    const auto w = next(key);
    if (w.size() != 2 || w[0] != key) fail("expected '" + key + " <value>'");
    return number<std::int64_t>(w[1], key);
  }

 private:
  std::vector<std::string> lines_;
  std::size_t pos_ = 0;
};

int parse_node(ModelReader& r, Tree& t, std::size_t tree_index, int depth) {
  const int k = static_cast<int>(t.nodes.size());
  const std::string where = "tree " + std::to_string(tree_index) + " node " + std::to_string(k);
  if (depth > 100000) r.fail(where + ": tree too deep");
  const auto w = r.next(where);
  TreeNode nd;
  if (w[0] == "leaf" && w.size() == 2) {
    nd.value = r.number<double>(w[1], where);
    if (!std::isfinite(nd.value)) r.fail(where + ": non-finite leaf value");
    t.nodes.push_back(nd);
    return k;
  }
  if (w[0] != "node" || w.size() != 3) r.fail(where + ": expected 'node <f> <thr>' or 'leaf <v>'");
  nd.feature = r.number<int>(w[1], where);
  if (nd.feature < 0 || nd.feature >= static_cast<int>(kNumFeatures)) {
    r.fail(where + ": feature index " + w[1] + " out of range");
  }
  nd.threshold = r.number<double>(w[2], where);
  t.nodes.push_back(nd);
  const int l = parse_node(r, t, tree_index, depth + 1);
  const int rr = parse_node(r, t, tree_index, depth + 1);
  t.nodes[static_cast<std::size_t>(k)].left = l;
  t.nodes[static_cast<std::size_t>(k)].right = rr;
  return k;
}

}  // namespace

std::string format_forest(const Forest& forest) {
  const Hyperparams& hp = forest.hyperparams();
  std::string out = std::string(kMagic) + '\n';
  out += "num_trees " + std::to_string(hp.num_trees) + '\n';
  out += "features_per_node " + std::to_string(hp.features_per_node) + '\n';
  out += "max_depth " + std::to_string(hp.max_depth) + '\n';
  out += "min_samples_leaf " + std::to_string(hp.min_samples_leaf) + '\n';
  out += "bootstrap " + std::string(hp.bootstrap ? "1" : "0") + '\n';
  out += "seed " + std::to_string(hp.seed) + '\n';
  out += "schema " + std::to_string(forest.schema().size()) + '\n';
  for (const std::string& name : forest.schema()) out += name + '\n';
  for (std::size_t t = 0; t < forest.trees().size(); ++t) {
    out += "tree " + std::to_string(t) + '\n';
    format_tree(forest.trees()[t], 0, out);
  }
  out += "end\n";
  return out;
}

Forest parse_forest(const std::string& text) {
  ModelReader r(text);
  if (r.raw_next("header") != kMagic) r.fail("not an lmtune forest file (bad header)");
  Hyperparams hp;
  hp.num_trees = static_cast<int>(r.keyed("num_trees"));
  hp.features_per_node = static_cast<int>(r.keyed("features_per_node"));
  hp.max_depth = static_cast<int>(r.keyed("max_depth"));
  hp.min_samples_leaf = static_cast<int>(r.keyed("min_samples_leaf"));
  hp.bootstrap = r.keyed("bootstrap") != 0;
  {
    const auto w = r.next("seed");
    if (w.size() != 2 || w[0] != "seed") r.fail("expected 'seed <value>'");
    hp.seed = r.number<std::uint64_t>(w[1], "seed");
  }
  if (auto v = validate_hyperparams(hp); !v.empty()) r.fail(v.front());

  const std::int64_t schema_size = r.keyed("schema");
  std::vector<std::string> schema;
  for (std::int64_t k = 0; k < schema_size; ++k) schema.push_back(r.raw_next("schema"));
  if (!std::equal(schema.begin(), schema.end(), kFeatureNames.begin(), kFeatureNames.end())) {
    throw SchemaError("model feature schema does not match the 18 built-in features");
  }

  std::vector<Tree> trees;
  while (true) {
    const auto w = r.next("tree header");
    if (w[0] == "end" && w.size() == 1) break;
    if (w[0] != "tree" || w.size() != 2 ||
        r.number<std::size_t>(w[1], "tree header") != trees.size()) {
      r.fail("expected 'tree " + std::to_string(trees.size()) + "' or 'end'");
    }
    Tree t;
    parse_node(r, t, trees.size(), 0);
    trees.push_back(std::move(t));
  }
  if (!r.done()) r.fail("content after 'end'");
  if (trees.empty()) throw ParseError("model has no trees", r.line_no());
  if (trees.size() != static_cast<std::size_t>(hp.num_trees)) {
    throw ParseError("model declares " + std::to_string(hp.num_trees) + " trees but has " +
                         std::to_string(trees.size()),
                     r.line_no());
  }
  return Forest(hp, std::move(trees));
}

void save_forest(const Forest& forest, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << format_forest(forest);
  if (!out) throw Error("write to " + path.string() + " failed");
}

Forest load_forest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_forest(buf.str());
}

}  // namespace lmtune
