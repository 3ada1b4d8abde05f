// Copyright 2026 The lmtune Authors
// SPDX-License-Identifier: Apache-2.0
//
// Random forest regression on the 18-feature vector. Trees fit log2(speedup);
// the forest predicts 2^(mean leaf value) and recommends the optimization
// when that exceeds 1.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lmtune/access_analysis.hpp"
#include "lmtune/dataset.hpp"

namespace lmtune {

struct Hyperparams {
  int num_trees = 20;
  int features_per_node = 4;
  int max_depth = 0;  // 0 = unlimited
  int min_samples_leaf = 1;
  bool bootstrap = true;
  std::uint64_t seed = 1;

  friend bool operator==(const Hyperparams&, const Hyperparams&) = default;
};

std::vector<std::string> validate_hyperparams(const Hyperparams& hp);

// Infeasible rows (speedup 0) and anything below 2^-10 train at -10.
inline constexpr double kLog2Floor = -10.0;
double training_target(double speedup);

struct TreeNode {
  int feature = -1;  // -1 for a leaf
  double threshold = 0.0;
  double value = 0.0;  // leaf mean
  int left = -1;       // x[feature] <= threshold
  int right = -1;

  bool is_leaf() const { return feature < 0; }
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct Tree {
  std::vector<TreeNode> nodes;  // pre-order, root first

  double predict(const FeatureVector& x) const;
  friend bool operator==(const Tree&, const Tree&) = default;
};

struct TrainReport {
  // Out-of-bag MSE (log2 domain) of the first k+1 trees, bootstrap only.
  std::vector<double> oob_mse;
};

class Forest {
 public:
  Forest() = default;
  Forest(Hyperparams hp, std::vector<Tree> trees);

  const Hyperparams& hyperparams() const { return hp_; }
  const std::vector<Tree>& trees() const { return trees_; }
  const std::vector<std::string>& schema() const { return schema_; }

  // Mean leaf value over trees; summed in sorted order so the result does not
  // depend on tree order.
  double predict_log2(const FeatureVector& x) const;
  double predict(const FeatureVector& x) const;
  bool decide(const FeatureVector& x) const { return predict(x) > 1.0; }

  // Internal nodes splitting on each feature.
  std::array<std::int64_t, kNumFeatures> split_counts() const;

  friend bool operator==(const Forest&, const Forest&) = default;

 private:
  Hyperparams hp_;
  std::vector<Tree> trees_;
  std::vector<std::string> schema_;
};

// Throws TrainingError for fewer than two rows, mismatched lengths, or
// non-finite inputs. `threads` (0 = hardware concurrency) does not affect the
// result.
Forest train(const std::vector<FeatureVector>& x, const std::vector<double>& targets,
             const Hyperparams& hp, int threads = 0, TrainReport* report = nullptr);
Forest train(const std::vector<LabeledInstance>& rows, const Hyperparams& hp, int threads = 0,
             TrainReport* report = nullptr);

std::string format_forest(const Forest& forest);
// Throws ParseError naming the offending tree/node, SchemaError when the
// feature schema differs from the built-in one.
Forest parse_forest(const std::string& text);
void save_forest(const Forest& forest, const std::filesystem::path& path);
Forest load_forest(const std::filesystem::path& path);

}  // namespace lmtune
