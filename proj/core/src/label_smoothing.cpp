#include "epxhop/label_smoothing.hpp"

#include <algorithm>
#include <string>

#include <spdlog/spdlog.h>

#include "epxhop/dataset.hpp"
#include "epxhop/error.hpp"
#include "epxhop/parallel.hpp"

namespace epxhop {
namespace {

void mean_of(const LabelMap& map, const std::vector<std::uint32_t>& nodes, int dims, float* out) {
  std::fill(out, out + dims, 0.0f);
  for (const auto n : nodes) {
    const float* v = map.node(n);
    for (int d = 0; d < dims; ++d) out[d] += v[d];
  }
  const float inv = 1.0f / static_cast<float>(nodes.size());
  for (int d = 0; d < dims; ++d) out[d] *= inv;
}

LabelMap predict_map(const BoostedModel& model, const FeatureMatrix& rows, int size, int class_count) {
  const int dims = label_dims(class_count);
  LabelMap map(size, dims);
  const Eigen::MatrixXd p = model.predict_proba(rows);
  std::vector<double> row(static_cast<std::size_t>(class_count));
  for (Eigen::Index n = 0; n < p.rows(); ++n) {
    for (int c = 0; c < class_count; ++c) row[static_cast<std::size_t>(c)] = p(n, c);
    store_label(row, map.data.data() + static_cast<std::size_t>(n) * dims);
  }
  return map;
}

FeatureMatrix update_rows(std::span<const LabelMap> maps, const LocalGraph& graph, std::size_t level, int dims) {
  const std::size_t n = graph.nodes(level);
  FeatureMatrix rows(static_cast<Eigen::Index>(n), 4 * dims);
  for (std::size_t node = 0; node < n; ++node) {
    aggregate_cross_hop(maps, graph, level, node, rows.row(static_cast<Eigen::Index>(node)).data());
  }
  return rows;
}

void check_levels(const LocalGraph& graph, std::span<const FeatureMap> features) {
  if (features.size() != graph.level_count()) {
    throw Error(Errc::dimension_mismatch, "expected " + std::to_string(graph.level_count()) +
                                              " feature levels, got " + std::to_string(features.size()));
  }
  for (std::size_t l = 0; l < features.size(); ++l) {
    if (features[l].size != graph.level(l).size) {
      throw Error(Errc::dimension_mismatch, "feature level " + std::to_string(l) + " has size " +
                                                std::to_string(features[l].size) + ", graph expects " +
                                                std::to_string(graph.level(l).size));
    }
  }
}

bool sampled(std::uint64_t key, std::size_t image, std::size_t node, std::size_t total, std::size_t budget) {
  if (budget == 0 || budget >= total) return true;
  const std::uint64_t h = mix64(key ^ mix64((static_cast<std::uint64_t>(image) << 20) ^ node));
  return h % total < budget;
}

// Stacks the selected rows of every image in image order. Falls back to all
// rows when sampling leaves a class without samples.
struct RowSet {
  FeatureMatrix x;
  std::vector<int> y;
};

RowSet gather(std::size_t images, std::size_t nodes, std::span<const int> targets, int class_count,
              std::size_t budget, std::uint64_t key, const std::function<FeatureMatrix(std::size_t)>& rows_of) {
  std::vector<FeatureMatrix> parts(images);
  std::vector<std::vector<std::uint32_t>> picks(images);
  const std::size_t total = images * nodes;
  auto pick_all = [&](std::size_t b) {
    for (std::size_t i = 0; i < images; ++i) {
      picks[i].clear();
      for (std::size_t n = 0; n < nodes; ++n)
        if (sampled(key, i, n, total, b)) picks[i].push_back(static_cast<std::uint32_t>(n));
    }
  };
  pick_all(budget);
  std::vector<char> present(static_cast<std::size_t>(class_count), 0);
  for (std::size_t i = 0; i < images; ++i)
    if (!picks[i].empty()) present[static_cast<std::size_t>(targets[i])] = 1;
  if (std::find(present.begin(), present.end(), 0) != present.end()) pick_all(0);

  parallel_for(images, [&](std::size_t i) {
    if (picks[i].empty()) return;
    const FeatureMatrix all = rows_of(i);
    FeatureMatrix sel(static_cast<Eigen::Index>(picks[i].size()), all.cols());
    for (std::size_t j = 0; j < picks[i].size(); ++j) {
      sel.row(static_cast<Eigen::Index>(j)) = all.row(picks[i][j]);
    }
    parts[i] = std::move(sel);
  });

  std::size_t count = 0;
  Eigen::Index width = 0;
  for (const auto& p : parts) {
    count += static_cast<std::size_t>(p.rows());
    if (p.rows() > 0) width = p.cols();
  }
  RowSet set;
  set.x.resize(static_cast<Eigen::Index>(count), width);
  set.y.reserve(count);
  Eigen::Index at = 0;
  for (std::size_t i = 0; i < images; ++i) {
    if (parts[i].rows() == 0) continue;
    set.x.middleRows(at, parts[i].rows()) = parts[i];
    at += parts[i].rows();
    set.y.insert(set.y.end(), static_cast<std::size_t>(parts[i].rows()), targets[i]);
  }
  return set;
}

BoostParams seeded(const BoostParams& base, std::uint64_t seed, std::uint64_t salt) {
  BoostParams p = base;
  p.seed = mix64(seed ^ mix64(salt));
  return p;
}

}  // namespace

void store_label(std::span<const double> proba, float* out) {
  for (std::size_t c = 0; c + 1 < proba.size(); ++c) {
    out[c] = static_cast<float>(std::clamp(proba[c], 0.0, 1.0));
  }
}

FeatureMatrix init_rows(const FeatureMap& features, const LabelMap* child_labels, const LocalGraph& graph,
                        std::size_t level, int dims) {
  const std::size_t n = features.nodes();
  const int extra = child_labels ? dims : 0;
  FeatureMatrix rows(static_cast<Eigen::Index>(n), features.channels + extra);
  for (std::size_t node = 0; node < n; ++node) {
    float* out = rows.row(static_cast<Eigen::Index>(node)).data();
    std::copy_n(features.node(node), features.channels, out);
    if (child_labels) mean_of(*child_labels, graph.children(level, node), dims, out + features.channels);
  }
  return rows;
}

void aggregate_cross_hop(std::span<const LabelMap> maps, const LocalGraph& graph, std::size_t level,
                         std::size_t node, float* out) {
  const LabelMap& here = maps[level];
  const int dims = here.channels;
  const float* self = here.node(node);
  std::copy_n(self, dims, out);

  const auto& sib = graph.siblings(level, node);
  if (sib.empty()) {
    std::copy_n(self, dims, out + dims);
  } else {
    mean_of(here, sib, dims, out + dims);
  }

  const auto& kids = graph.children(level, node);
  if (kids.empty() || level == 0) {
    std::copy_n(self, dims, out + 2 * dims);
  } else {
    mean_of(maps[level - 1], kids, dims, out + 2 * dims);
  }

  const auto& parents = level + 1 < graph.level_count() ? graph.parents(level, node) : std::vector<std::uint32_t>{};
  if (parents.empty()) {
    std::copy_n(self, dims, out + 3 * dims);
  } else {
    mean_of(maps[level + 1], parents, dims, out + 3 * dims);
  }
}

std::vector<float> aggregate_cross_hop(std::span<const LabelMap> maps, const LocalGraph& graph,
                                       std::size_t level, std::size_t node) {
  std::vector<float> out(static_cast<std::size_t>(4 * maps[level].channels));
  aggregate_cross_hop(maps, graph, level, node, out.data());
  return out;
}

std::vector<LabelMap> init_labels(const SlsModel& model, const LocalGraph& graph,
                                  std::span<const FeatureMap> level_features) {
  check_levels(graph, level_features);
  if (model.init.size() != graph.level_count()) {
    throw Error(Errc::dimension_mismatch, "label smoothing model has " + std::to_string(model.init.size()) +
                                              " initial classifiers for " +
                                              std::to_string(graph.level_count()) + " levels");
  }
  const int dims = label_dims(model.class_count);
  std::vector<LabelMap> maps;
  for (std::size_t l = 0; l < graph.level_count(); ++l) {
    const LabelMap* kids = (model.mode == SlsMode::full && l > 0) ? &maps[l - 1] : nullptr;
    const FeatureMatrix rows = init_rows(level_features[l], kids, graph, l, dims);
    maps.push_back(predict_map(model.init[l], rows, graph.level(l).size, model.class_count));
  }
  return maps;
}

void sls_update(const SlsModel& model, const LocalGraph& graph, std::vector<LabelMap>& maps, int rounds) {
  if (rounds < 0 || static_cast<std::size_t>(rounds) > model.updates.size()) {
    throw Error(Errc::invalid_argument, "label smoothing has " + std::to_string(model.updates.size()) +
                                            " update iterations, " + std::to_string(rounds) + " requested");
  }
  const int dims = label_dims(model.class_count);
  for (int k = 0; k < rounds; ++k) {
    const auto& level_models = model.updates[static_cast<std::size_t>(k)];
    for (std::size_t l = 0; l < graph.level_count(); ++l) {
      const FeatureMatrix rows = update_rows(maps, graph, l, dims);
      maps[l] = predict_map(level_models[l], rows, graph.level(l).size, model.class_count);
    }
  }
}

std::vector<LabelMap> infer_labels(const SlsModel& model, const LocalGraph& graph,
                                   std::span<const FeatureMap> level_features) {
  auto maps = init_labels(model, graph, level_features);
  sls_update(model, graph, maps, static_cast<int>(model.updates.size()));
  return maps;
}

SlsTrainResult fit_sls(std::size_t image_count, const LevelFeatureFn& features, std::span<const int> targets,
                       const LocalGraph& graph, int class_count, const SlsTrainOptions& options) {
  if (targets.size() != image_count) throw Error(Errc::dimension_mismatch, "one target per image required");
  if (options.num_iter < 1) throw Error(Errc::invalid_config, "num_iter must be at least 1");
  const int dims = label_dims(class_count);
  const std::size_t levels = graph.level_count();

  SlsTrainResult result;
  SlsModel& model = result.model;
  model.class_count = class_count;
  model.mode = options.mode;
  result.maps.assign(image_count, std::vector<LabelMap>(levels));
  auto& maps = result.maps;

  for (std::size_t l = 0; l < levels; ++l) {
    const bool with_kids = options.mode == SlsMode::full && l > 0;
    auto rows_of = [&](std::size_t i) {
      const auto f = features(i);
      check_levels(graph, f);
      return init_rows(f[l], with_kids ? &maps[i][l - 1] : nullptr, graph, l, dims);
    };
    const RowSet set = gather(image_count, graph.nodes(l), targets, class_count, options.max_samples_per_level,
                              mix64(options.seed ^ (0x100 + l)), rows_of);
    spdlog::debug("sls init level {}: {} rows x {} features", l, set.x.rows(), set.x.cols());
    model.init.push_back(fit_boosted(set.x, set.y, class_count, seeded(options.params, options.seed, 0x100 + l)));
    parallel_for(image_count, [&](std::size_t i) {
      maps[i][l] = predict_map(model.init[l], rows_of(i), graph.level(l).size, class_count);
    });
  }

  const int updates = options.mode == SlsMode::full ? options.num_iter - 1 : 0;
  for (int k = 0; k < updates; ++k) {
    model.updates.emplace_back();
    for (std::size_t l = 0; l < levels; ++l) {
      auto rows_of = [&](std::size_t i) { return update_rows(maps[i], graph, l, dims); };
      const std::uint64_t salt = 0x10000 + static_cast<std::uint64_t>(k) * 0x100 + l;
      const RowSet set = gather(image_count, graph.nodes(l), targets, class_count, options.max_samples_per_level,
                                mix64(options.seed ^ salt), rows_of);
      spdlog::debug("sls update {} level {}: {} rows", k + 1, l, set.x.rows());
      model.updates.back().push_back(fit_boosted(set.x, set.y, class_count, seeded(options.params, options.seed, salt)));
      const BoostedModel& h = model.updates.back().back();
      std::vector<LabelMap> next(image_count);
      parallel_for(image_count, [&](std::size_t i) {
        next[i] = predict_map(h, rows_of(i), graph.level(l).size, class_count);
      });
      for (std::size_t i = 0; i < image_count; ++i) maps[i][l] = std::move(next[i]);
    }
  }
  return result;
}

void validate(const SlsModel& model, std::size_t levels) {
  if (model.class_count < 2) throw Error(Errc::corrupt_model, "label smoothing needs at least two classes");
  if (model.init.size() != levels) throw Error(Errc::corrupt_model, "label smoothing level count mismatch");
  const int dims = label_dims(model.class_count);
  for (const auto& m : model.init) {
    if (m.class_count() != model.class_count) throw Error(Errc::corrupt_model, "initial classifier class count");
    validate(m);
  }
  for (const auto& iteration : model.updates) {
    if (iteration.size() != levels) throw Error(Errc::corrupt_model, "update iteration level count mismatch");
    for (const auto& m : iteration) {
      if (m.class_count() != model.class_count || m.feature_count() != 4 * dims) {
        throw Error(Errc::corrupt_model, "update classifier width must be 4 * (C - 1)");
      }
      validate(m);
    }
  }
}

}  // namespace epxhop
