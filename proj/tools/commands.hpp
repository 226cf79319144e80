#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "epxhop/run_config.hpp"

namespace epxhop::cli {

// Flags shared by every subcommand; set ones override the config file.
struct Overrides {
  std::optional<std::filesystem::path> config;
  std::optional<std::filesystem::path> output_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> resolve_top_k;
  std::optional<std::filesystem::path> data_dir;
};

RunConfig resolve_config(const Overrides& o);

int cmd_train_stage1(const RunConfig& config, std::ostream& out);
int cmd_train_pairs(const RunConfig& config, const std::filesystem::path& stage1_path, bool split_files,
                    std::ostream& out);
int cmd_evaluate(const RunConfig& config, const std::filesystem::path& stage1_path,
                 const std::vector<std::filesystem::path>& pair_paths, int heatmaps, std::ostream& out);
int cmd_predict(const RunConfig& config, const std::filesystem::path& stage1_path,
                const std::vector<std::filesystem::path>& pair_paths, const std::filesystem::path& image_file,
                std::size_t index, std::ostream& out);
int cmd_inspect(const std::filesystem::path& path, std::ostream& out);

}  // namespace epxhop::cli
