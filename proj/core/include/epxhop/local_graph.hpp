#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "epxhop/cascade.hpp"

namespace epxhop {

// A sliding-window or pooling step between two square grids. Coarse
// coordinate p covers fine coordinates p*stride - padding ... + window - 1.
struct GridOp {
  int window = 3;
  int stride = 1;
  int padding = 0;

  int output_size(int input) const noexcept { return (input + 2 * padding - window) / stride + 1; }
  bool operator==(const GridOp&) const = default;
};

// One level of the label pyramid. ops lead from the previous level's grid to
// this one, applied in order; the first level has none.
struct GraphLevel {
  int size = 0;
  std::vector<GridOp> ops;

  bool operator==(const GraphLevel&) const = default;
};

// A hop output used as a pyramid level; pooled selects the post-pool grid.
struct HopRef {
  int hop = 0;  // 0-based
  bool pooled = false;

  bool operator==(const HopRef&) const = default;
};

// Translates cascade hops into pyramid levels. Throws Errc::configuration
// when refs are not strictly deeper one after another or name a missing pool.
std::vector<GraphLevel> graph_levels(std::span<const HopConfig> configs, int input_size,
                                     std::span<const HopRef> refs);

// Node ids are row-major (r * size + c) within a level.
class LocalGraph {
 public:
  LocalGraph() = default;
  explicit LocalGraph(std::vector<GraphLevel> levels);

  std::size_t level_count() const noexcept { return levels_.size(); }
  const GraphLevel& level(std::size_t l) const { return levels_[l]; }
  std::size_t nodes(std::size_t l) const {
    return static_cast<std::size_t>(levels_[l].size) * levels_[l].size;
  }

  // Nodes of level l - 1; empty at level 0.
  const std::vector<std::uint32_t>& children(std::size_t l, std::size_t node) const {
    return children_[l][node];
  }
  // Nodes of level l + 1 whose footprint contains this node; empty at the top.
  const std::vector<std::uint32_t>& parents(std::size_t l, std::size_t node) const {
    return parents_[l][node];
  }
  // 8-connected neighbours within the level.
  const std::vector<std::uint32_t>& siblings(std::size_t l, std::size_t node) const {
    return siblings_[l][node];
  }

 private:
  std::vector<GraphLevel> levels_;
  std::vector<std::vector<std::vector<std::uint32_t>>> children_;
  std::vector<std::vector<std::vector<std::uint32_t>>> parents_;
  std::vector<std::vector<std::vector<std::uint32_t>>> siblings_;
};

// Throws Errc::configuration when a level's ops do not map the previous
// size onto its size.
LocalGraph build_local_graph(std::vector<GraphLevel> levels);

}  // namespace epxhop
