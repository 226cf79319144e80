#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "epxhop/cascade.hpp"
#include "epxhop/gbdt.hpp"
#include "epxhop/label_smoothing.hpp"

namespace epxhop {

struct RunConfig {
  std::filesystem::path data_dir;
  std::filesystem::path output_dir = "epxhop-out";
  std::uint64_t seed = 0;

  SelectionMode mode = SelectionMode::fixed_k;
  double th1 = 0.005;
  double th2 = 0.001;
  std::array<int, 4> p_channels = kPChannelCounts;
  std::array<int, 4> q_channels = kQChannelCounts;
  bool saab_bias = false;
  std::size_t saab_fit_images = 10000;  // 0 = every training image

  BoostParams pixel_params;
  BoostParams meta_params;
  std::size_t max_pixel_samples = 200000;  // node rows per level classifier; 0 = all

  SlsMode sls_mode = SlsMode::full;
  int num_iter_stage1 = 1;
  int num_iter_stage2 = 3;
  bool augment = true;
  bool channel_ablation = true;  // also fit P-only and Q-only meta classifiers
  int resolve_top_k = -1;        // -1 = every confusion set with members

  std::vector<int> classes;         // empty = all ten
  std::size_t train_per_class = 0;  // 0 = no limit
  std::size_t test_per_class = 0;
  std::size_t feature_cache_mb = 2048;

  bool operator==(const RunConfig&) const = default;
};

// Line-oriented "key = value"; '#' starts a comment. Unknown keys throw
// Errc::unknown_config_key, malformed values Errc::invalid_config.
RunConfig parse_run_config(std::string_view text);
RunConfig load_run_config(const std::filesystem::path& path);

// Every key, one per line; parse_run_config(format_run_config(c)) == c.
std::string format_run_config(const RunConfig& config);

// Hop configurations for the P (channel 0) or Q (channel 1) cascade.
std::vector<HopConfig> hop_configs(const RunConfig& config, int channel);

}  // namespace epxhop
