#include "commands.hpp"

#include <chrono>
#include <fstream>
#include <iomanip>
#include <numeric>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "epxhop/confusion.hpp"
#include "epxhop/dataset.hpp"
#include "epxhop/error.hpp"
#include "epxhop/heatmap.hpp"
#include "epxhop/model_store.hpp"
#include "epxhop/parallel.hpp"
#include "epxhop/pipeline.hpp"

namespace epxhop::cli {
namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

std::vector<LabeledImage> load_split(const RunConfig& config, CifarSplit split) {
  if (config.data_dir.empty()) throw Error(Errc::invalid_config, "data_dir is not set");
  auto all = load_cifar10(config.data_dir, split);
  std::vector<int> classes = config.classes;
  if (classes.empty()) {
    classes.resize(kCifarClasses);
    std::iota(classes.begin(), classes.end(), 0);
  }
  const std::size_t limit = split == CifarSplit::train ? config.train_per_class : config.test_per_class;
  auto kept = filter_classes(all, classes, limit);
  spdlog::info("{} split: {} images", split == CifarSplit::train ? "train" : "test", kept.size());
  return kept;
}

json shapes_json(const std::vector<HopShape>& shapes) {
  json out = json::array();
  for (const auto& s : shapes) {
    json hop{{"size", s.size}, {"channels", s.channels}};
    if (s.pooled_size > 0) hop["pooled_size"] = s.pooled_size;
    out.push_back(hop);
  }
  return out;
}

json spatial_sizes(const std::vector<HopShape>& shapes) {
  json out = json::array();
  for (const auto& s : shapes) {
    out.push_back(s.size);
    if (s.pooled_size > 0) out.push_back(s.pooled_size);
  }
  return out;
}

json base_report(const std::string& command, const RunConfig& config) {
  return json{{"command", command},
              {"seed", config.seed},
              {"threads", thread_count()},
              {"config", format_run_config(config)}};
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::io, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

Stage1Model load_stage1(const fs::path& path) {
  auto file = load_model_file(path);
  if (!file.stage1) throw Error(Errc::corrupt_model, path.string() + " holds no stage-1 model");
  return std::move(*file.stage1);
}

std::vector<PairModel> load_pairs(const std::vector<fs::path>& paths, const Stage1Model& stage1) {
  std::vector<PairModel> pairs;
  for (const auto& p : paths) {
    auto file = load_model_file(p);
    for (auto& pair : file.pairs) {
      validate(pair, stage1);
      pairs.push_back(std::move(pair));
    }
  }
  return pairs;
}

}  // namespace

RunConfig resolve_config(const Overrides& o) {
  RunConfig c = o.config ? load_run_config(*o.config) : RunConfig{};
  if (o.output_dir) c.output_dir = *o.output_dir;
  if (o.seed) c.seed = *o.seed;
  if (o.resolve_top_k) c.resolve_top_k = *o.resolve_top_k;
  if (o.data_dir) c.data_dir = *o.data_dir;
  return c;
}

int cmd_train_stage1(const RunConfig& config, std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  const auto train = load_split(config, CifarSplit::train);
  TrainReport tr;
  const Stage1Model model = train_stage1(train, config, &tr);

  fs::create_directories(config.output_dir);
  const fs::path model_path = config.output_dir / "stage1.epxm";
  save_model_file(model_path, {model, {}, format_run_config(config)});

  json report = base_report("train-stage1", config);
  report["images"] = tr.images;
  report["classes"] = model.class_labels;
  report["shapes"] = {{"P", shapes_json(tr.shapes[0])}, {"Q", shapes_json(tr.shapes[1])}};
  report["spatial_sizes"] = spatial_sizes(tr.shapes[0]);
  report["color_energy_fractions"] = {model.color.energy_fractions[0], model.color.energy_fractions[1],
                                      model.color.energy_fractions[2]};
  report["meta"] = {{"rows", tr.meta_rows}, {"width", tr.meta_width}};
  json timings = json::object();
  for (const auto& [name, s] : tr.timings) timings[name] = s;
  timings["total"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  report["timings"] = timings;
  report["model"] = model_path.string();
  write_json(config.output_dir / "train_stage1_report.json", report);
  out << report.dump(2) << '\n';
  return 0;
}

int cmd_train_pairs(const RunConfig& config, const fs::path& stage1_path, bool split_files, std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  const Stage1Model stage1 = load_stage1(stage1_path);
  const auto test = load_split(config, CifarSplit::test);
  const auto sets = build_confusion_sets(stage1_decisions(stage1, test));
  const std::size_t count =
      config.resolve_top_k < 0 ? sets.size() : std::min(sets.size(), static_cast<std::size_t>(config.resolve_top_k));
  const auto train = load_split(config, CifarSplit::train);

  fs::create_directories(config.output_dir);
  json report = base_report("train-pairs", config);
  report["stage1"] = stage1_path.string();
  report["pairs"] = json::array();
  std::vector<PairModel> pairs;
  for (std::size_t k = 0; k < count; ++k) {
    const int a = stage1.class_labels[static_cast<std::size_t>(sets[k].a)];
    const int b = stage1.class_labels[static_cast<std::size_t>(sets[k].b)];
    spdlog::info("pair {}/{}: classes ({}, {}), {} test members", k + 1, count, a, b, sets[k].members.size());
    TrainReport tr;
    PairModel pair = train_pair_model(a, b, train, stage1, config, &tr);
    json entry{{"rank", k}, {"a", a}, {"b", b}, {"test_members", sets[k].members.size()},
               {"train_images", tr.images}, {"meta_width", tr.meta_width}};
    if (split_files) {
      const fs::path path = config.output_dir / ("pair_" + std::to_string(a) + "_" + std::to_string(b) + ".epxm");
      save_model_file(path, {std::nullopt, {pair}, format_run_config(config)});
      entry["model"] = path.string();
    }
    report["pairs"].push_back(entry);
    pairs.push_back(std::move(pair));
  }
  if (!split_files) {
    const fs::path path = config.output_dir / "pairs.epxm";
    save_model_file(path, {std::nullopt, pairs, format_run_config(config)});
    report["model"] = path.string();
  }
  report["timings"] = {
      {"total", std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()}};
  write_json(config.output_dir / "train_pairs_report.json", report);
  out << report.dump(2) << '\n';
  return 0;
}

int cmd_evaluate(const RunConfig& config, const fs::path& stage1_path, const std::vector<fs::path>& pair_paths,
                 int heatmaps, std::ostream& out) {
  const Stage1Model stage1 = load_stage1(stage1_path);
  const auto pairs = load_pairs(pair_paths, stage1);
  const auto test = load_split(config, CifarSplit::test);
  const auto report = evaluate(stage1, pairs, test, config.resolve_top_k);
  write_report_csv(report, config.output_dir);

  const fs::path heat_dir = config.output_dir / "heatmaps";
  const std::size_t shown = std::min(test.size(), static_cast<std::size_t>(std::max(0, heatmaps)));
  if (shown > 0) fs::create_directories(heat_dir);
  for (std::size_t i = 0; i < shown; ++i) {
    const auto maps = stage1_label_maps(stage1, test[i].image);
    for (std::size_t ch = 0; ch < 2; ++ch)
      for (std::size_t l = 0; l < maps[ch].size(); ++l)
        for (int d = 0; d < maps[ch][l].channels; ++d) {
          const std::string name = "image" + std::to_string(test[i].id) + "_" + (ch == 0 ? "P" : "Q") + "_level" +
                                   std::to_string(l) + "_class" +
                                   std::to_string(stage1.class_labels[static_cast<std::size_t>(d)]) + ".png";
          write_heatmap_png(heat_dir / name, maps[ch][l], d, 32 / std::max(1, maps[ch][l].size) + 1);
        }
  }

  json j = base_report("evaluate", config);
  j["test_images"] = test.size();
  j["stage1_top1"] = report.stage1_top1;
  j["stage1_top2"] = report.stage1_top2;
  j["final_top1"] = report.final_top1;
  j["pair_models"] = pairs.size();
  json acc = json::array();
  for (const auto& row : report.accuracy) acc.push_back({{"model", row.name}, {"top1", row.top1}, {"top2", row.top2}});
  j["accuracy"] = acc;
  j["outputs"] = config.output_dir.string();
  write_json(config.output_dir / "evaluate_report.json", j);
  out << j.dump(2) << '\n';
  return 0;
}

int cmd_predict(const RunConfig& config, const fs::path& stage1_path, const std::vector<fs::path>& pair_paths,
                const fs::path& image_file, std::size_t index, std::ostream& out) {
  const Stage1Model stage1 = load_stage1(stage1_path);
  const auto pairs = load_pairs(pair_paths, stage1);
  const auto images = parse_cifar10_batch(read_file_bytes(image_file));
  if (index >= images.size()) {
    throw Error(Errc::invalid_argument, "record index " + std::to_string(index) + " out of range; file holds " +
                                            std::to_string(images.size()) + " records");
  }
  const auto& image = images[index];
  const auto d = predict_stage1(stage1, image);
  const int final_label = predict_final(stage1, pairs, image, config.resolve_top_k);
  out << std::setprecision(6) << std::fixed;
  for (int c = 0; c < stage1.class_count(); ++c) {
    out << stage1.class_labels[static_cast<std::size_t>(c)] << ' ' << d.fused[c] << '\n';
  }
  out << "prediction " << final_label << '\n';
  return 0;
}

int cmd_inspect(const fs::path& path, std::ostream& out) {
  const auto bytes = read_file_bytes(path);
  const auto manifest = read_manifest(bytes);
  out << path.string() << ": " << bytes.size() << " bytes, container " << kContainerMagic << '\n';
  out << "chunks:\n";
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    const auto& e = manifest[i];
    out << "  " << std::setw(3) << i << "  " << std::left << std::setw(12) << chunk_name(e.kind) << std::right
        << " offset " << e.offset << "  length " << e.length << "  crc32 " << std::hex << std::setw(8)
        << std::setfill('0') << e.crc << std::dec << std::setfill(' ') << '\n';
  }
  const auto file = decode_model_file(bytes);
  if (file.stage1) {
    const auto& m = *file.stage1;
    out << "stage-1 model: classes";
    for (int l : m.class_labels) out << ' ' << l;
    out << "\n  color energy " << m.color.energy_fractions.transpose() << '\n';
    for (std::size_t ch = 0; ch < 2; ++ch) {
      out << "  " << (ch == 0 ? 'P' : 'Q') << " cascade:";
      for (const auto& s : m.cascades[ch].output_shapes()) {
        out << " (" << s.size << "," << s.size << "," << s.channels << ")";
        if (s.pooled_size > 0) out << "->pool(" << s.pooled_size << "," << s.pooled_size << ")";
      }
      out << "\n  " << (ch == 0 ? 'P' : 'Q') << " label smoothing: " << m.sls[ch].init.size() << " levels, num_iter "
          << m.sls[ch].num_iter() << '\n';
    }
    out << "  meta: " << m.meta.feature_count() << " inputs, " << m.meta.rounds() << " rounds"
        << (m.meta_p ? ", with P-only and Q-only ablations" : "") << '\n';
  }
  for (const auto& p : file.pairs) {
    out << "pair model (" << p.a << ", " << p.b << "): num_iter " << p.sls[0].num_iter() << ", meta "
        << p.meta.feature_count() << " inputs\n";
  }
  if (file.config_text) out << "config:\n" << *file.config_text;
  return 0;
}

}  // namespace epxhop::cli
