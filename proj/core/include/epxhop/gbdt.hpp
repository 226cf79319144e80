#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "epxhop/feature_map.hpp"

namespace epxhop {

struct BoostParams {
  int rounds = 200;
  int max_depth = 4;
  double learning_rate = 0.1;
  int min_leaf_samples = 20;
  double subsample = 0.8;  // per-class (stratified) row fraction per round
  double colsample = 1.0;  // feature fraction per tree
  double lambda = 1.0;     // L2 penalty on leaf weights
  int max_bins = 256;
  std::uint64_t seed = 0;

  bool operator==(const BoostParams&) const = default;
};

// Axis-aligned regression tree; a node with feature < 0 is a leaf.
struct TreeNode {
  std::int32_t feature = -1;
  float threshold = 0.0f;  // go left when x <= threshold
  std::int32_t left = -1;
  std::int32_t right = -1;
  double value = 0.0;  // leaf contribution (learning rate already applied)

  bool operator==(const TreeNode&) const = default;
};

struct RegressionTree {
  std::vector<TreeNode> nodes;

  double predict(const float* row) const;
  int depth() const;
  int leaf_count() const;

  bool operator==(const RegressionTree&) const = default;
};

// Softmax-objective boosted ensemble. trees[r * class_count + c] is the
// round-r tree for class c.
class BoostedModel {
 public:
  BoostedModel() = default;
  BoostedModel(int class_count, int feature_count, BoostParams params)
      : class_count_(class_count), feature_count_(feature_count), params_(params) {}

  int class_count() const noexcept { return class_count_; }
  int feature_count() const noexcept { return feature_count_; }
  int rounds() const noexcept {
    return class_count_ == 0 ? 0 : static_cast<int>(trees_.size()) / class_count_;
  }
  const BoostParams& params() const noexcept { return params_; }
  const std::vector<RegressionTree>& trees() const noexcept { return trees_; }
  std::vector<RegressionTree>& mutable_trees() noexcept { return trees_; }

  // Per-row C-vectors on the probability simplex. max_rounds < 0 uses all
  // rounds. Throws Errc::dimension_mismatch on width mismatch.
  Eigen::MatrixXd predict_proba(const FeatureMatrix& rows, int max_rounds = -1) const;
  void predict_proba_row(const float* row, std::span<double> out, int max_rounds = -1) const;

  bool operator==(const BoostedModel&) const = default;

 private:
  int class_count_ = 0;
  int feature_count_ = 0;
  BoostParams params_;
  std::vector<RegressionTree> trees_;
};

struct FitReport {
  std::vector<double> train_loss;  // mean multinomial log-loss after each round
};

// Fits rounds x C trees on gradients and hessians of the multinomial
// log-loss. Deterministic for a given (data, params). Throws when features
// are non-finite, targets fall outside [0, C), fewer than two classes are
// requested, or some class has no sample.
BoostedModel fit_boosted(const FeatureMatrix& rows, std::span<const int> targets, int class_count,
                         const BoostParams& params, std::span<const double> sample_weights = {},
                         FitReport* report = nullptr);

// Mean multinomial log-loss of model on (rows, targets).
double log_loss(const BoostedModel& model, const FeatureMatrix& rows, std::span<const int> targets,
                int max_rounds = -1);

void validate(const BoostedModel& model);

}  // namespace epxhop
