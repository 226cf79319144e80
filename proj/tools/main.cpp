#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <spdlog/cfg/helpers.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "commands.hpp"
#include "epxhop/error.hpp"
#include "epxhop/parallel.hpp"

namespace {

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("epxhop");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::info);
  if (const char* env = std::getenv("EPXHOP_LOG")) spdlog::cfg::helpers::load_levels(env);
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  namespace cli = epxhop::cli;

  CLI::App app{"epxhop image classification: training, evaluation and inspection"};
  app.require_subcommand(1);

  cli::Overrides o;
  std::size_t threads = 0;
  std::string config_path, output_dir, data_dir;
  std::uint64_t seed = 0;
  int resolve_top_k = -1;
  auto* config_opt = app.add_option("--config", config_path, "key = value run configuration");
  app.add_option("--threads", threads, "worker threads (0 = all cores)");
  auto* out_opt = app.add_option("--output-dir", output_dir, "directory for models, reports and metrics");
  auto* seed_opt = app.add_option("--seed", seed, "overrides the configured seed");
  auto* topk_opt = app.add_option("--resolve-top-k", resolve_top_k, "confusion sets to resolve (-1 = all)");
  auto* data_opt = app.add_option("--data-dir", data_dir, "directory holding the CIFAR-10 binary batches");

  auto* train1 = app.add_subcommand("train-stage1", "fit color PCA, cascades, label smoothing and meta classifier");

  auto* train2 = app.add_subcommand("train-pairs", "fit one-vs-one models for the top confusion sets");
  std::string stage1_path;
  bool split_files = false;
  train2->add_option("--stage1", stage1_path, "stage-1 model container")->required();
  train2->add_flag("--split", split_files, "write one container per pair");

  auto* eval = app.add_subcommand("evaluate", "write accuracy, confusion and curve CSVs plus label heatmaps");
  std::vector<std::string> pair_paths;
  int heatmaps = 2;
  eval->add_option("--stage1", stage1_path, "stage-1 model container")->required();
  eval->add_option("--pairs", pair_paths, "pair model containers");
  eval->add_option("--heatmaps", heatmaps, "test images to render label heatmaps for");

  auto* predict = app.add_subcommand("predict", "classify one record of a CIFAR-format file");
  std::string image_file;
  std::size_t index = 0;
  predict->add_option("--stage1", stage1_path, "stage-1 model container")->required();
  predict->add_option("--pairs", pair_paths, "pair model containers");
  predict->add_option("--image", image_file, "file of 3073-byte records")->required();
  predict->add_option("--index", index, "record index within the file");

  auto* inspect = app.add_subcommand("inspect", "print a container's manifest and model shapes");
  std::string inspect_path;
  inspect->add_option("path", inspect_path, "model container")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(epxhop::ErrorClass::config);
  }

  try {
    epxhop::set_thread_count(threads);
    if (*config_opt) o.config = config_path;
    if (*out_opt) o.output_dir = output_dir;
    if (*seed_opt) o.seed = seed;
    if (*topk_opt) o.resolve_top_k = resolve_top_k;
    if (*data_opt) o.data_dir = data_dir;

    if (*inspect) return cli::cmd_inspect(inspect_path, std::cout);
    const auto config = cli::resolve_config(o);
    std::vector<std::filesystem::path> pairs(pair_paths.begin(), pair_paths.end());
    if (*train1) return cli::cmd_train_stage1(config, std::cout);
    if (*train2) return cli::cmd_train_pairs(config, stage1_path, split_files, std::cout);
    if (*eval) return cli::cmd_evaluate(config, stage1_path, pairs, heatmaps, std::cout);
    if (*predict) return cli::cmd_predict(config, stage1_path, pairs, image_file, index, std::cout);
  } catch (const epxhop::Error& e) {
    spdlog::error("{} [{}]", e.what(), epxhop::errc_name(e.code()));
    return static_cast<int>(epxhop::error_class(e.code()));
  } catch (const std::exception& e) {
    spdlog::error("internal error: {}", e.what());
    return static_cast<int>(epxhop::ErrorClass::internal);
  }
  return static_cast<int>(epxhop::ErrorClass::internal);
}
