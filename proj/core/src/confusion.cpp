#include "epxhop/confusion.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <string>

#include "epxhop/error.hpp"

namespace epxhop {

std::vector<int> top_m(std::span<const double> soft, int m) {
  if (m < 0 || static_cast<std::size_t>(m) > soft.size()) {
    throw Error(Errc::invalid_argument,
                "top_m: m=" + std::to_string(m) + " exceeds " + std::to_string(soft.size()) + " classes");
  }
  std::vector<int> order(soft.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int x, int y) {
    return soft[static_cast<std::size_t>(x)] > soft[static_cast<std::size_t>(y)];
  });
  order.resize(static_cast<std::size_t>(m));
  return order;
}

std::uint64_t n_cg(int c, int m) {
  if (c < 0 || m < 0 || m > c) return 0;
  m = std::min(m, c - m);
  std::uint64_t r = 1;
  for (int i = 1; i <= m; ++i) r = r * static_cast<std::uint64_t>(c - m + i) / static_cast<std::uint64_t>(i);
  return r;
}

std::vector<ConfusionSet> build_confusion_sets(const Eigen::MatrixXd& decisions) {
  if (decisions.cols() < 2) throw Error(Errc::invalid_argument, "confusion sets need at least two classes");
  std::map<std::pair<int, int>, std::vector<std::uint32_t>> groups;
  std::vector<double> row(static_cast<std::size_t>(decisions.cols()));
  for (Eigen::Index i = 0; i < decisions.rows(); ++i) {
    for (Eigen::Index c = 0; c < decisions.cols(); ++c) row[static_cast<std::size_t>(c)] = decisions(i, c);
    const auto top = top_m(row, 2);
    groups[{std::min(top[0], top[1]), std::max(top[0], top[1])}].push_back(static_cast<std::uint32_t>(i));
  }
  std::vector<ConfusionSet> sets;
  for (auto& [pair, members] : groups) sets.push_back({pair.first, pair.second, std::move(members), 0});
  std::stable_sort(sets.begin(), sets.end(),
                   [](const ConfusionSet& x, const ConfusionSet& y) { return x.members.size() > y.members.size(); });
  for (std::size_t r = 0; r < sets.size(); ++r) sets[r].priority_rank = static_cast<int>(r);
  return sets;
}

}  // namespace epxhop
