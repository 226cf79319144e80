#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "epxhop/feature_map.hpp"
#include "epxhop/saab.hpp"

namespace epxhop {

struct PoolConfig {
  int window = 3;
  int stride = 2;
};

struct HopConfig {
  Window window;
  std::optional<PoolConfig> pool_after;
  double th1 = 0.005;  // forward (intermediate) threshold
  double th2 = 0.001;  // discard threshold, th2 <= th1
  // Threshold mode: optional cap on emitted channels.
  // Fixed-K mode: exact number of emitted channels.
  std::optional<int> max_channels;
};

enum class SelectionMode : std::uint8_t { threshold = 0, fixed_k = 1 };

// The four-hop architecture: 5x5 (pad 2) + 3x3/2 pool, 5x5 (pad 2) + 3x3/2
// pool, 3x3, 3x3. channel_counts feed max_channels for each hop.
std::vector<HopConfig> default_hop_configs(const std::array<int, 4>& channel_counts,
                                           double th1 = 0.005, double th2 = 0.001);

inline constexpr std::array<int, 4> kPChannelCounts{24, 144, 203, 211};
inline constexpr std::array<int, 4> kQChannelCounts{22, 114, 174, 185};

// A channel emitted by a hop: child `child` (0 = DC) of node `node`.
struct EmittedChannel {
  std::uint32_t node = 0;
  std::uint32_t child = 0;
  ChannelRole role = ChannelRole::leaf;
  double energy = 0.0;

  bool operator==(const EmittedChannel&) const = default;
};

struct HopModel {
  HopConfig config;
  std::vector<SaabNode> nodes;  // one per forwarded input channel
  std::vector<EmittedChannel> channels;  // ordered by (node, child)
  int input_size = 0;
  int output_size = 0;
  int pooled_size = 0;  // 0 when no pooling follows

  int output_channels() const noexcept { return static_cast<int>(channels.size()); }
};

struct HopShape {
  int size = 0;
  int channels = 0;
  int pooled_size = 0;

  bool operator==(const HopShape&) const = default;
};

struct CascadeModel {
  SelectionMode mode = SelectionMode::fixed_k;
  bool bias = false;
  int input_size = 0;
  std::vector<HopModel> hops;

  std::vector<HopShape> output_shapes() const;
};

struct CascadeOptions {
  SelectionMode mode = SelectionMode::fixed_k;
  bool bias = false;
};

// Fits hop 1 on every patch of every map, then one node per forwarded channel
// at each deeper hop. Maps must be single-channel and share one size.
CascadeModel fit_cascade(std::span<const FeatureMap> maps, std::span<const HopConfig> configs,
                         const CascadeOptions& options = {});

struct CascadeOutput {
  std::vector<FeatureMap> hops;                   // hop-1 ... hop-n
  std::vector<std::optional<FeatureMap>> pooled;  // present where pool_after is set
};

CascadeOutput apply_cascade(const FeatureMap& map, const CascadeModel& model);

// One hop's transform of its (already pooled) input map.
FeatureMap transform_hop(const FeatureMap& input, const HopModel& hop);

// Inclusive input-pixel interval [lo, hi] along one axis covered by output
// coordinate `coord` of hop `hop` (0-based); pooled selects the hop's pooled
// grid. Border clipping applied.
std::array<int, 2> receptive_interval(std::span<const HopConfig> configs, int input_size, int hop,
                                      bool pooled, int coord);

void validate(const CascadeModel& model);

}  // namespace epxhop
