#include "epxhop/cascade.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <spdlog/spdlog.h>

#include "epxhop/error.hpp"
#include "epxhop/parallel.hpp"

namespace epxhop {
namespace {

constexpr std::size_t kMapsPerChunk = 32;

struct Candidate {
  std::uint32_t node;
  std::uint32_t child;
  double energy;
};

bool by_energy(const Candidate& a, const Candidate& b) {
  if (a.energy != b.energy) return a.energy > b.energy;
  if (a.node != b.node) return a.node < b.node;
  return a.child < b.child;
}

void check_configs(std::span<const HopConfig> configs, SelectionMode mode) {
  if (configs.empty()) throw Error(Errc::configuration, "cascade needs at least one hop");
  for (std::size_t h = 0; h < configs.size(); ++h) {
    const auto& c = configs[h];
    const std::string where = "hop " + std::to_string(h + 1);
    if (!(c.th2 > 0.0 && c.th2 <= c.th1 && c.th1 <= 1.0)) {
      throw Error(Errc::configuration, where + ": thresholds must satisfy 0 < th2 <= th1 <= 1");
    }
    if (mode == SelectionMode::fixed_k && (!c.max_channels || *c.max_channels <= 0)) {
      throw Error(Errc::configuration, where + ": fixed-K mode needs a positive channel count");
    }
    if (c.max_channels && *c.max_channels <= 0) {
      throw Error(Errc::configuration, where + ": channel cap must be positive");
    }
  }
}

// Two-pass moments of one input channel's patches across all maps, reduced
// over fixed-size chunks in chunk order.
PatchMoments accumulate_moments(std::span<const FeatureMap> maps, int channel, const Window& window) {
  const std::size_t n = maps.size();
  const std::size_t chunks = chunk_count(n, kMapsPerChunk);
  const int dim = window.area();

  std::vector<Eigen::VectorXd> sums(chunks, Eigen::VectorXd::Zero(dim));
  std::vector<std::size_t> counts(chunks, 0);
  std::vector<double> norms(chunks, 0.0);
  parallel_chunks(n, kMapsPerChunk, [&](std::size_t c, std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      const Eigen::MatrixXd p = extract_neighborhoods(maps[i], channel, window);
      sums[c] += p.colwise().sum().transpose();
      counts[c] += static_cast<std::size_t>(p.rows());
      if (p.rows() > 0) norms[c] = std::max(norms[c], p.rowwise().norm().maxCoeff());
    }
  });

  PatchMoments m;
  m.mean = Eigen::VectorXd::Zero(dim);
  for (std::size_t c = 0; c < chunks; ++c) {
    m.mean += sums[c];
    m.count += counts[c];
    m.max_norm = std::max(m.max_norm, norms[c]);
  }
  if (m.count == 0) {
    m.covariance = Eigen::MatrixXd::Zero(dim, dim);
    return m;
  }
  m.mean /= static_cast<double>(m.count);

  std::vector<Eigen::MatrixXd> cross(chunks, Eigen::MatrixXd::Zero(dim, dim));
  parallel_chunks(n, kMapsPerChunk, [&](std::size_t c, std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      Eigen::MatrixXd p = extract_neighborhoods(maps[i], channel, window);
      p.rowwise() -= m.mean.transpose();
      cross[c].noalias() += p.transpose() * p;
    }
  });
  m.covariance = Eigen::MatrixXd::Zero(dim, dim);
  for (const auto& x : cross) m.covariance += x;
  m.covariance /= static_cast<double>(m.count);
  return m;
}

// Chooses emitted channels and their roles for one fitted hop.
std::vector<EmittedChannel> select_channels(std::vector<SaabNode>& nodes,
                                            std::span<const HopConfig> configs, std::size_t hop,
                                            SelectionMode mode) {
  const HopConfig& cfg = configs[hop];
  const bool last = hop + 1 == configs.size();

  std::vector<Candidate> candidates;
  for (std::uint32_t j = 0; j < nodes.size(); ++j) {
    const auto& energies = nodes[j].child_energies;
    for (std::uint32_t c = 0; c < energies.size(); ++c) candidates.push_back({j, c, energies[c]});
  }
  std::stable_sort(candidates.begin(), candidates.end(), by_energy);

  std::vector<Candidate> kept;
  if (mode == SelectionMode::fixed_k) {
    const auto k = static_cast<std::size_t>(*cfg.max_channels);
    if (candidates.size() < k) {
      throw Error(Errc::configuration,
                  "hop " + std::to_string(hop + 1) + " requests " + std::to_string(k) +
                      " channels but only " + std::to_string(candidates.size()) +
                      " candidates exist; lower the channel count or th1 of hop " +
                      std::to_string(hop));
    }
    kept.assign(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(k));
  } else {
    for (const auto& c : candidates) {
      if (c.child == 0 || c.energy >= cfg.th2) kept.push_back(c);
    }
    if (cfg.max_channels && kept.size() > static_cast<std::size_t>(*cfg.max_channels)) {
      kept.resize(static_cast<std::size_t>(*cfg.max_channels));
    }
  }

  // kept is in descending energy order here.
  std::vector<ChannelRole> roles(kept.size(), ChannelRole::leaf);
  if (!last) {
    std::size_t forwarded = 0;
    for (std::size_t i = 0; i < kept.size(); ++i) {
      if (kept[i].child == 0 || kept[i].energy >= cfg.th1) {
        roles[i] = ChannelRole::intermediate;
        ++forwarded;
      }
    }
    if (mode == SelectionMode::fixed_k) {
      // The next hop draws window-area children from each forwarded channel;
      // promote the strongest leaves until its channel count is reachable.
      const auto& next = configs[hop + 1];
      const auto area = static_cast<std::size_t>(next.window.area());
      const auto needed = (static_cast<std::size_t>(*next.max_channels) + area - 1) / area;
      for (std::size_t i = 0; i < kept.size() && forwarded < needed; ++i) {
        if (roles[i] == ChannelRole::leaf) {
          roles[i] = ChannelRole::intermediate;
          ++forwarded;
        }
      }
      if (forwarded < needed) {
        throw Error(Errc::configuration,
                    "hop " + std::to_string(hop + 1) + " cannot forward enough channels for hop " +
                        std::to_string(hop + 2) + "'s channel count");
      }
    }
    if (forwarded == 0) {
      throw Error(Errc::configuration,
                  "hop " + std::to_string(hop + 1) + " forwards no channel: th1=" +
                      std::to_string(cfg.th1) + " is above every channel energy");
    }
  }

  std::vector<EmittedChannel> emitted;
  emitted.reserve(kept.size());
  for (std::size_t i = 0; i < kept.size(); ++i) {
    emitted.push_back({kept[i].node, kept[i].child, roles[i], kept[i].energy});
  }
  std::sort(emitted.begin(), emitted.end(), [](const EmittedChannel& a, const EmittedChannel& b) {
    return a.node != b.node ? a.node < b.node : a.child < b.child;
  });

  for (auto& node : nodes) node.child_roles.assign(node.child_energies.size(), ChannelRole::discarded);
  for (const auto& e : emitted) nodes[e.node].child_roles[e.child] = e.role;
  return emitted;
}

}  // namespace

std::vector<HopConfig> default_hop_configs(const std::array<int, 4>& channel_counts, double th1,
                                           double th2) {
  std::vector<HopConfig> hops(4);
  hops[0].window = {5, 5, 1, 1, 2};
  hops[0].pool_after = PoolConfig{};
  hops[1].window = {5, 5, 1, 1, 2};
  hops[1].pool_after = PoolConfig{};
  hops[2].window = {3, 3, 1, 1, 0};
  hops[3].window = {3, 3, 1, 1, 0};
  for (std::size_t h = 0; h < hops.size(); ++h) {
    hops[h].th1 = th1;
    hops[h].th2 = th2;
    hops[h].max_channels = channel_counts[h];
  }
  return hops;
}

std::vector<HopShape> CascadeModel::output_shapes() const {
  std::vector<HopShape> shapes;
  for (const auto& h : hops) shapes.push_back({h.output_size, h.output_channels(), h.pooled_size});
  return shapes;
}

FeatureMap transform_hop(const FeatureMap& input, const HopModel& hop) {
  if (input.size != hop.input_size) {
    throw Error(Errc::dimension_mismatch,
                "hop expects a " + std::to_string(hop.input_size) + "x" +
                    std::to_string(hop.input_size) + " input, got " + std::to_string(input.size));
  }
  FeatureMap out(hop.output_size, hop.output_channels());
  std::size_t e = 0;
  while (e < hop.channels.size()) {
    const std::uint32_t node_index = hop.channels[e].node;
    const SaabNode& node = hop.nodes[node_index];
    if (static_cast<int>(node.input_channel) >= input.channels) {
      throw Error(Errc::dimension_mismatch, "Saab node reads a channel missing from its input");
    }
    const Eigen::MatrixXd coeffs =
        apply_saab(extract_neighborhoods(input, static_cast<int>(node.input_channel), hop.config.window), node);
    for (; e < hop.channels.size() && hop.channels[e].node == node_index; ++e) {
      const auto child = static_cast<Eigen::Index>(hop.channels[e].child);
      for (Eigen::Index p = 0; p < coeffs.rows(); ++p) {
        out.data[static_cast<std::size_t>(p) * out.channels + e] = static_cast<float>(coeffs(p, child));
      }
    }
  }
  return out;
}

CascadeModel fit_cascade(std::span<const FeatureMap> maps, std::span<const HopConfig> configs,
                         const CascadeOptions& options) {
  check_configs(configs, options.mode);
  if (maps.empty()) throw Error(Errc::insufficient_samples, "cascade fit needs at least one map");
  for (const auto& m : maps) {
    if (m.channels != 1 || m.size != maps.front().size) {
      throw Error(Errc::dimension_mismatch, "cascade fit expects single-channel maps of one size");
    }
  }

  CascadeModel model;
  model.mode = options.mode;
  model.bias = options.bias;
  model.input_size = maps.front().size;

  std::vector<FeatureMap> owned;  // inputs of the current hop once past hop 1
  std::span<const FeatureMap> inputs = maps;
  struct Source {
    std::uint32_t channel;
    double energy;
  };
  std::vector<Source> sources{{0, 1.0}};
  int size = model.input_size;

  for (std::size_t h = 0; h < configs.size(); ++h) {
    HopModel hop;
    hop.config = configs[h];
    hop.input_size = size;
    const int padded = size + 2 * hop.config.window.padding;
    if (padded < hop.config.window.height || padded < hop.config.window.width) {
      throw Error(Errc::configuration, "hop " + std::to_string(h + 1) + " window exceeds its input");
    }
    hop.output_size = hop.config.window.output_size(size);

    for (const auto& src : sources) {
      const PatchMoments moments = accumulate_moments(inputs, static_cast<int>(src.channel), hop.config.window);
      SaabNode node = fit_saab(moments, hop.config.window.area() - 1);
      node.parent_energy = src.energy;
      for (auto& e : node.child_energies) e *= src.energy;
      node.input_channel = src.channel;
      node.bias = options.bias ? moments.max_norm : 0.0;
      hop.nodes.push_back(std::move(node));
    }
    hop.channels = select_channels(hop.nodes, configs, h, options.mode);

    if (hop.config.pool_after) {
      if (hop.output_size < hop.config.pool_after->window) {
        throw Error(Errc::configuration, "hop " + std::to_string(h + 1) + " output too small to pool");
      }
      hop.pooled_size = pooled_size(hop.output_size, hop.config.pool_after->window, hop.config.pool_after->stride);
    }
    spdlog::debug("hop {}: {} nodes, {}x{}x{} output", h + 1, hop.nodes.size(), hop.output_size,
                  hop.output_size, hop.channels.size());

    if (h + 1 < configs.size()) {
      std::vector<FeatureMap> next(inputs.size());
      const HopModel& fitted = hop;
      parallel_for(inputs.size(), [&](std::size_t i) {
        FeatureMap out = transform_hop(inputs[i], fitted);
        next[i] = fitted.config.pool_after
                      ? max_pool(out, fitted.config.pool_after->window, fitted.config.pool_after->stride)
                      : std::move(out);
      });
      owned = std::move(next);
      inputs = owned;
      sources.clear();
      for (std::uint32_t e = 0; e < hop.channels.size(); ++e) {
        if (hop.channels[e].role == ChannelRole::intermediate) sources.push_back({e, hop.channels[e].energy});
      }
      size = hop.pooled_size > 0 ? hop.pooled_size : hop.output_size;
    }
    model.hops.push_back(std::move(hop));
  }
  return model;
}

CascadeOutput apply_cascade(const FeatureMap& map, const CascadeModel& model) {
  if (map.channels != 1 || map.size != model.input_size) {
    throw Error(Errc::dimension_mismatch,
                "cascade expects a " + std::to_string(model.input_size) + "x" +
                    std::to_string(model.input_size) + "x1 input");
  }
  CascadeOutput out;
  const FeatureMap* current = &map;
  for (const auto& hop : model.hops) {
    out.hops.push_back(transform_hop(*current, hop));
    if (hop.config.pool_after) {
      out.pooled.emplace_back(max_pool(out.hops.back(), hop.config.pool_after->window, hop.config.pool_after->stride));
      current = &*out.pooled.back();
    } else {
      out.pooled.emplace_back(std::nullopt);
      current = &out.hops.back();
    }
  }
  return out;
}

std::array<int, 2> receptive_interval(std::span<const HopConfig> configs, int input_size, int hop,
                                      bool pooled, int coord) {
  if (hop < 0 || static_cast<std::size_t>(hop) >= configs.size()) {
    throw Error(Errc::invalid_argument, "receptive_interval: hop out of range");
  }
  std::vector<int> sizes{input_size};  // grid sizes feeding each hop
  for (int h = 0; h < hop; ++h) {
    int s = configs[static_cast<std::size_t>(h)].window.output_size(sizes.back());
    if (const auto& p = configs[static_cast<std::size_t>(h)].pool_after) s = pooled_size(s, p->window, p->stride);
    sizes.push_back(s);
  }
  int lo = coord;
  int hi = coord;
  for (int h = hop; h >= 0; --h) {
    const auto& cfg = configs[static_cast<std::size_t>(h)];
    if (h == hop ? pooled : cfg.pool_after.has_value()) {
      const auto p = cfg.pool_after.value_or(PoolConfig{});
      const int out_size = cfg.window.output_size(sizes[static_cast<std::size_t>(h)]);
      lo = lo * p.stride;
      hi = std::min(out_size - 1, hi * p.stride + p.window - 1);
    }
    const int in_size = sizes[static_cast<std::size_t>(h)];
    lo = std::max(0, lo * cfg.window.stride_h - cfg.window.padding);
    hi = std::min(in_size - 1, hi * cfg.window.stride_h - cfg.window.padding + cfg.window.height - 1);
  }
  return {lo, hi};
}

void validate(const CascadeModel& model) {
  for (std::size_t h = 0; h < model.hops.size(); ++h) {
    const auto& hop = model.hops[h];
    for (const auto& node : hop.nodes) {
      const int n = node.patch_size();
      if (n != hop.config.window.area() || node.ac_kernels.cols() != n ||
          node.eigenvalues.size() != node.ac_kernels.rows() ||
          node.child_energies.size() != static_cast<std::size_t>(node.kernel_count()) ||
          node.child_roles.size() != node.child_energies.size()) {
        throw Error(Errc::corrupt_model, "Saab node shapes are inconsistent at hop " + std::to_string(h + 1));
      }
    }
    for (const auto& e : hop.channels) {
      if (e.node >= hop.nodes.size() || static_cast<int>(e.child) >= hop.nodes[e.node].kernel_count()) {
        throw Error(Errc::corrupt_model, "emitted channel references a missing kernel");
      }
    }
    if (h > 0) {
      const auto inputs = static_cast<std::uint32_t>(model.hops[h - 1].channels.size());
      for (const auto& node : hop.nodes) {
        if (node.input_channel >= inputs) throw Error(Errc::corrupt_model, "Saab node input channel out of range");
      }
    }
  }
}

}  // namespace epxhop
