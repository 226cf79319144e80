#include "epxhop/local_graph.hpp"

#include <algorithm>
#include <string>

#include "epxhop/error.hpp"

namespace epxhop {

std::vector<GraphLevel> graph_levels(std::span<const HopConfig> configs, int input_size,
                                     std::span<const HopRef> refs) {
  std::vector<GraphLevel> levels;
  int size = input_size;
  int hop_out = 0;
  std::vector<int> out_sizes;
  std::vector<int> pooled_sizes;
  for (const auto& cfg : configs) {
    hop_out = cfg.window.output_size(size);
    out_sizes.push_back(hop_out);
    const int pooled = cfg.pool_after ? pooled_size(hop_out, cfg.pool_after->window, cfg.pool_after->stride) : 0;
    pooled_sizes.push_back(pooled);
    size = cfg.pool_after ? pooled : hop_out;
  }

  auto pool_op = [&](int hop) {
    const auto& p = configs[static_cast<std::size_t>(hop)].pool_after;
    return GridOp{p->window, p->stride, 0};
  };
  auto window_op = [&](int hop) {
    const auto& w = configs[static_cast<std::size_t>(hop)].window;
    if (w.height != w.width || w.stride_h != w.stride_w) {
      throw Error(Errc::configuration, "label pyramid needs square windows");
    }
    return GridOp{w.height, w.stride_h, w.padding};
  };

  for (std::size_t i = 0; i < refs.size(); ++i) {
    const HopRef& ref = refs[i];
    if (ref.hop < 0 || static_cast<std::size_t>(ref.hop) >= configs.size()) {
      throw Error(Errc::configuration, "label pyramid references hop " + std::to_string(ref.hop + 1) +
                                           " of a " + std::to_string(configs.size()) + "-hop cascade");
    }
    if (ref.pooled && !configs[static_cast<std::size_t>(ref.hop)].pool_after) {
      throw Error(Errc::configuration, "hop " + std::to_string(ref.hop + 1) + " has no pooling");
    }
    GraphLevel level;
    level.size = ref.pooled ? pooled_sizes[static_cast<std::size_t>(ref.hop)]
                            : out_sizes[static_cast<std::size_t>(ref.hop)];
    if (i > 0) {
      const HopRef& prev = refs[i - 1];
      if (ref.hop <= prev.hop) throw Error(Errc::configuration, "label pyramid hops must increase");
      if (!prev.pooled && configs[static_cast<std::size_t>(prev.hop)].pool_after) {
        level.ops.push_back(pool_op(prev.hop));
      }
      for (int h = prev.hop + 1; h <= ref.hop; ++h) {
        level.ops.push_back(window_op(h));
        const bool pool_here = h < ref.hop ? configs[static_cast<std::size_t>(h)].pool_after.has_value() : ref.pooled;
        if (pool_here) level.ops.push_back(pool_op(h));
      }
    }
    levels.push_back(std::move(level));
  }
  return levels;
}

LocalGraph::LocalGraph(std::vector<GraphLevel> levels) : levels_(std::move(levels)) {
  const std::size_t count = levels_.size();
  children_.resize(count);
  parents_.resize(count);
  siblings_.resize(count);

  for (std::size_t l = 0; l < count; ++l) {
    const int s = levels_[l].size;
    if (s <= 0) throw Error(Errc::configuration, "label pyramid level " + std::to_string(l) + " is empty");
    const std::size_t n = nodes(l);
    children_[l].resize(n);
    parents_[l].resize(n);
    siblings_[l].resize(n);

    for (int r = 0; r < s; ++r)
      for (int c = 0; c < s; ++c) {
        auto& sib = siblings_[l][static_cast<std::size_t>(r) * s + c];
        for (int dr = -1; dr <= 1; ++dr)
          for (int dc = -1; dc <= 1; ++dc) {
            const int rr = r + dr;
            const int cc = c + dc;
            if ((dr != 0 || dc != 0) && rr >= 0 && rr < s && cc >= 0 && cc < s) {
              sib.push_back(static_cast<std::uint32_t>(rr * s + cc));
            }
          }
      }

    if (l == 0) {
      if (!levels_[0].ops.empty()) throw Error(Errc::configuration, "first pyramid level cannot have ops");
      continue;
    }

    // Grid sizes after each op, starting at the previous level.
    std::vector<int> sizes{levels_[l - 1].size};
    for (const auto& op : levels_[l].ops) {
      if (op.window <= 0 || op.stride <= 0 || op.padding < 0 || sizes.back() + 2 * op.padding < op.window) {
        throw Error(Errc::configuration, "pyramid op does not fit grid of size " + std::to_string(sizes.back()));
      }
      sizes.push_back(op.output_size(sizes.back()));
    }
    if (levels_[l].ops.empty() || sizes.back() != s) {
      throw Error(Errc::configuration, "pyramid level " + std::to_string(l) + " has size " + std::to_string(s) +
                                           " but its ops produce " + std::to_string(sizes.back()));
    }

    auto trace = [&](int coord) {
      int lo = coord;
      int hi = coord;
      for (std::size_t k = levels_[l].ops.size(); k-- > 0;) {
        const auto& op = levels_[l].ops[k];
        lo = std::max(0, lo * op.stride - op.padding);
        hi = std::min(sizes[k] - 1, hi * op.stride - op.padding + op.window - 1);
      }
      return std::array<int, 2>{lo, hi};
    };

    const int fine = levels_[l - 1].size;
    for (int r = 0; r < s; ++r) {
      const auto rows = trace(r);
      for (int c = 0; c < s; ++c) {
        const auto cols = trace(c);
        const auto id = static_cast<std::uint32_t>(r * s + c);
        auto& kids = children_[l][id];
        for (int fr = rows[0]; fr <= rows[1]; ++fr)
          for (int fc = cols[0]; fc <= cols[1]; ++fc) {
            const auto child = static_cast<std::uint32_t>(fr * fine + fc);
            kids.push_back(child);
            parents_[l - 1][child].push_back(id);
          }
      }
    }
  }
}

LocalGraph build_local_graph(std::vector<GraphLevel> levels) { return LocalGraph(std::move(levels)); }

}  // namespace epxhop
