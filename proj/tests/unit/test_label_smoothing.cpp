#include <gtest/gtest.h>

#include "epxhop/cascade.hpp"
#include "epxhop/color_pca.hpp"
#include "epxhop/error.hpp"
#include "epxhop/label_smoothing.hpp"
#include "synthetic.hpp"

namespace epxhop {
namespace {

const auto kConfigs = default_hop_configs(kPChannelCounts);
const HopRef kRefs[] = {{1, true}, {2, false}, {3, false}};

LocalGraph stage1_graph() { return build_local_graph(graph_levels(kConfigs, 32, kRefs)); }

std::vector<LabelMap> constant_pyramid(const LocalGraph& g, int dims, float value) {
  std::vector<LabelMap> maps;
  for (std::size_t l = 0; l < g.level_count(); ++l) maps.emplace_back(g.level(l).size, dims, value);
  return maps;
}

TEST(SlsAggregate, IdenticalChildrenAverageToThemselves) {
  const LocalGraph g = stage1_graph();
  auto maps = constant_pyramid(g, 3, 0.0f);
  for (std::size_t n = 0; n < g.nodes(0); ++n) {
    maps[0].data[n * 3 + 0] = 0.2f;
    maps[0].data[n * 3 + 1] = 0.5f;
    maps[0].data[n * 3 + 2] = 0.1f;
  }
  const auto agg = aggregate_cross_hop(maps, g, 1, 12);
  EXPECT_FLOAT_EQ(agg[6], 0.2f);
  EXPECT_FLOAT_EQ(agg[7], 0.5f);
  EXPECT_FLOAT_EQ(agg[8], 0.1f);
}

TEST(SlsAggregate, EightOfNineChildren) {
  // Classes (cat, dog): the stored component is p(cat); dog is the complement.
  const LocalGraph g = stage1_graph();
  auto maps = constant_pyramid(g, 1, 0.0f);
  const std::size_t node = 4;  // (1,1) of the 3x3 level
  const auto& kids = g.children(2, node);
  ASSERT_EQ(kids.size(), 9u);
  maps[1].data[kids[4]] = 1.0f;  // one cat child, eight dogs
  const auto agg = aggregate_cross_hop(maps, g, 2, node);
  EXPECT_NEAR(1.0 - agg[2], 8.0 / 9.0, 1e-6);
}

TEST(SlsAggregate, WidthsAndConstantPyramid) {
  const LocalGraph g = stage1_graph();
  const auto c2 = constant_pyramid(g, label_dims(2), 0.3f);
  for (std::size_t l = 0; l < 3; ++l)
    for (std::size_t n : {std::size_t{0}, g.nodes(l) / 2}) {
      const auto agg = aggregate_cross_hop(c2, g, l, n);
      ASSERT_EQ(agg.size(), 4u);
      for (float v : agg) EXPECT_FLOAT_EQ(v, 0.3f);
    }
  const auto c10 = constant_pyramid(g, label_dims(10), 0.1f);
  EXPECT_EQ(aggregate_cross_hop(c10, g, 1, 3).size(), 36u);
}

TEST(SlsAggregate, OrderAndSubstitution) {
  const LocalGraph g = stage1_graph();
  auto maps = constant_pyramid(g, 1, 0.0f);
  for (std::size_t n = 0; n < g.nodes(0); ++n) maps[0].data[n] = 0.1f;
  for (std::size_t n = 0; n < g.nodes(1); ++n) maps[1].data[n] = 0.2f;
  for (std::size_t n = 0; n < g.nodes(2); ++n) maps[2].data[n] = 0.3f;
  maps[1].data[12] = 0.9f;
  const auto mid = aggregate_cross_hop(maps, g, 1, 12);
  EXPECT_FLOAT_EQ(mid[0], 0.9f);  // self
  EXPECT_FLOAT_EQ(mid[1], 0.2f);  // siblings exclude the centre
  EXPECT_FLOAT_EQ(mid[2], 0.1f);  // children
  EXPECT_FLOAT_EQ(mid[3], 0.3f);  // parents
  const auto bottom = aggregate_cross_hop(maps, g, 0, 0);
  EXPECT_FLOAT_EQ(bottom[2], 0.1f);  // no children: self
  const auto top = aggregate_cross_hop(maps, g, 2, 0);
  EXPECT_FLOAT_EQ(top[3], 0.3f);  // no parent: self
}

TEST(SlsUpdate, ZeroRoundClassifiersAreAFixedPoint) {
  const LocalGraph g = stage1_graph();
  const int classes = 4, dims = label_dims(classes);
  SlsModel model;
  model.class_count = classes;
  for (int l = 0; l < 3; ++l) model.init.emplace_back(classes, 5 + (l > 0 ? dims : 0), BoostParams{});
  for (int k = 0; k < 2; ++k) {
    model.updates.emplace_back();
    for (int l = 0; l < 3; ++l) model.updates.back().emplace_back(classes, 4 * dims, BoostParams{});
  }
  std::vector<FeatureMap> features;
  for (std::size_t l = 0; l < 3; ++l) features.emplace_back(g.level(l).size, 5, 0.7f);
  auto maps = init_labels(model, g, features);
  const auto before = maps;
  sls_update(model, g, maps, 0);
  EXPECT_EQ(maps, before);
  sls_update(model, g, maps, 2);
  EXPECT_EQ(maps, before);
  for (const auto& m : maps)
    for (float v : m.data) EXPECT_FLOAT_EQ(v, 0.25f);
  EXPECT_THROW(sls_update(model, g, maps, 3), Error);

  SlsModel missing = model;
  missing.init.pop_back();
  EXPECT_THROW(init_labels(missing, g, features), Error);
}

struct ToyData {
  std::vector<std::vector<FeatureMap>> levels;  // per image
  std::vector<int> targets;
  LocalGraph graph;
  int deep_channels = 0;
};

// Two-hop cascade on 50 synthetic images, levels = pooled hop 1 and hop 2.
ToyData toy_data() {
  const int classes[] = {0, 1, 2};
  const auto images = testing::synthetic_images(classes, 17, 4);
  const ColorPCA pca = fit_color_pca(std::span(images).first(50));
  std::vector<FeatureMap> p_maps;
  for (std::size_t i = 0; i < 50; ++i) p_maps.push_back(project_pq(images[i].image, pca).first);
  auto configs = default_hop_configs(kPChannelCounts);
  configs.resize(2);
  configs[1].window = {3, 3, 1, 1, 0};
  configs[1].pool_after.reset();
  configs[1].max_channels = 20;
  const CascadeModel cascade = fit_cascade(p_maps, configs);
  const HopRef refs[] = {{0, true}, {1, false}};
  ToyData d;
  d.graph = build_local_graph(graph_levels(configs, 32, refs));
  for (std::size_t i = 0; i < 50; ++i) {
    const auto out = apply_cascade(p_maps[i], cascade);
    d.levels.push_back({*out.pooled[0], out.hops[1]});
    d.targets.push_back(*images[i].label);
  }
  d.deep_channels = cascade.hops[1].output_channels();
  return d;
}

TEST(SlsInit, DeepWidthIsFeaturesPlusLabelDims) {
  const ToyData d = toy_data();
  SlsTrainOptions options;
  options.params.rounds = 5;
  options.params.min_leaf_samples = 5;
  options.max_samples_per_level = 3000;
  const auto result = fit_sls(
      d.targets.size(), [&](std::size_t i) { return d.levels[i]; }, d.targets, d.graph, 3, options);
  ASSERT_EQ(result.model.init.size(), 2u);
  EXPECT_EQ(result.model.init[0].feature_count(), 24);
  EXPECT_EQ(result.model.init[1].feature_count(), d.deep_channels + 2);
  EXPECT_TRUE(result.model.updates.empty());
  EXPECT_EQ(result.model.num_iter(), 1);

  // Independent builder: features of the node, then the per-component mean of
  // the shallow labels over the node's 3x3 footprint.
  const auto& shallow = result.maps[0][0];
  const FeatureMatrix rows = init_rows(d.levels[0][1], &shallow, d.graph, 1, 2);
  ASSERT_EQ(rows.cols(), d.deep_channels + 2);
  const int s = d.levels[0][1].size;
  for (int r = 0; r < s; r += 4)
    for (int c = 0; c < s; c += 4) {
      const auto n = static_cast<Eigen::Index>(r * s + c);
      for (int k = 0; k < d.deep_channels; ++k) EXPECT_EQ(rows(n, k), d.levels[0][1].at(r, c, k));
      for (int comp = 0; comp < 2; ++comp) {
        double sum = 0.0;
        for (int dr = 0; dr < 3; ++dr)
          for (int dc = 0; dc < 3; ++dc) sum += shallow.at(r + dr, c + dc, comp);
        EXPECT_NEAR(rows(n, d.deep_channels + comp), sum / 9.0, 1e-6);
      }
    }

  for (const auto& pyramid : result.maps)
    for (const auto& m : pyramid) {
      EXPECT_EQ(m.channels, 2);
      for (std::size_t n = 0; n < m.nodes(); ++n) {
        const float* v = m.node(n);
        EXPECT_GE(v[0], 0.0f);
        EXPECT_GE(v[1], 0.0f);
        EXPECT_LE(v[0] + v[1], 1.0f + 1e-6f);
      }
    }
}

TEST(SlsTrain, UpdatesFollowNumIterAndMode) {
  const ToyData d = toy_data();
  SlsTrainOptions options;
  options.params.rounds = 3;
  options.params.min_leaf_samples = 5;
  options.max_samples_per_level = 2000;
  options.num_iter = 3;
  auto features = [&](std::size_t i) { return d.levels[i]; };
  const auto full = fit_sls(d.targets.size(), features, d.targets, d.graph, 3, options);
  ASSERT_EQ(full.model.updates.size(), 2u);
  EXPECT_EQ(full.model.num_iter(), 3);
  for (const auto& it : full.model.updates)
    for (const auto& h : it) EXPECT_EQ(h.feature_count(), 8);
  EXPECT_NO_THROW(validate(full.model, 2));

  // Inference replays training exactly on training images.
  const auto replay = infer_labels(full.model, d.graph, d.levels[7]);
  EXPECT_EQ(replay, full.maps[7]);

  options.mode = SlsMode::intra_hop;
  const auto intra = fit_sls(d.targets.size(), features, d.targets, d.graph, 3, options);
  EXPECT_TRUE(intra.model.updates.empty());
  EXPECT_EQ(intra.model.init[1].feature_count(), d.deep_channels);
}

TEST(SlsTrain, TargetsAreBroadcastToEveryNode) {
  // Uninformative features: the fitted classifiers can only learn the share
  // of node rows per class, which equals the image share when every node of
  // an image carries its label.
  const LocalGraph g = stage1_graph();
  std::vector<int> targets(30);
  for (int i = 0; i < 30; ++i) targets[i] = i % 3 == 0 ? 1 : 0;
  SlsTrainOptions options;
  options.params.rounds = 60;
  options.params.learning_rate = 0.3;
  options.params.subsample = 1.0;
  options.params.min_leaf_samples = 1;
  auto features = [&](std::size_t) {
    std::vector<FeatureMap> f;
    for (std::size_t l = 0; l < 3; ++l) f.emplace_back(g.level(l).size, 2, 1.0f);
    return f;
  };
  const auto result = fit_sls(30, features, targets, g, 2, options);
  for (const auto& m : result.maps[0])
    for (float v : m.data) EXPECT_NEAR(v, 2.0 / 3.0, 1e-3);
}

}  // namespace
}  // namespace epxhop
