#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace epxhop {

// Indices of the m largest entries, descending; ties go to the lower index.
std::vector<int> top_m(std::span<const double> soft, int m);

// Number of unordered m-subsets of c classes.
std::uint64_t n_cg(int c, int m);

struct ConfusionSet {
  int a = 0;  // a < b, indices into the decision vectors
  int b = 0;
  std::vector<std::uint32_t> members;  // positions in the decision list
  int priority_rank = 0;               // 0 = most members

  bool operator==(const ConfusionSet&) const = default;
};

// Groups each decision (one row per image) by its top-2 pair and ranks the
// pairs by descending membership, ties by (a, b).
std::vector<ConfusionSet> build_confusion_sets(const Eigen::MatrixXd& decisions);

}  // namespace epxhop
