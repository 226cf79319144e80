#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "epxhop/feature_map.hpp"
#include "epxhop/gbdt.hpp"
#include "epxhop/local_graph.hpp"

namespace epxhop {

// Soft labels of one pyramid level: size x size x (C - 1). The last class
// component is implied by the complement.
using LabelMap = FeatureMap;

inline int label_dims(int class_count) noexcept { return class_count - 1; }

enum class SlsMode : std::uint8_t {
  full = 0,       // init from features plus child labels, then cross-hop updates
  intra_hop = 1,  // every level predicted from its own features only
};

struct SlsModel {
  int class_count = 0;
  SlsMode mode = SlsMode::full;
  std::vector<BoostedModel> init;                  // one per level
  std::vector<std::vector<BoostedModel>> updates;  // [iteration][level]

  // Initialisation counts as the first iteration.
  int num_iter() const noexcept { return 1 + static_cast<int>(updates.size()); }
};

// Writes the first C - 1 components of a probability vector.
void store_label(std::span<const double> proba, float* out);

// Row for the level-l initial classifier at every node: the node's features,
// followed (level > 0, full mode) by the mean label of its children.
FeatureMatrix init_rows(const FeatureMap& features, const LabelMap* child_labels, const LocalGraph& graph,
                        std::size_t level, int dims);

// [self, mean(siblings), mean(children), parent] for one node, 4 * dims wide.
// Missing children, parents or siblings are replaced by the node's own label.
void aggregate_cross_hop(std::span<const LabelMap> maps, const LocalGraph& graph, std::size_t level,
                         std::size_t node, float* out);
std::vector<float> aggregate_cross_hop(std::span<const LabelMap> maps, const LocalGraph& graph,
                                       std::size_t level, std::size_t node);

// Initial labels shallow to deep. level_features[l] must match the graph.
std::vector<LabelMap> init_labels(const SlsModel& model, const LocalGraph& graph,
                                  std::span<const FeatureMap> level_features);

// Runs rounds update iterations in place (rounds <= model.updates.size()).
// Within an iteration levels are visited shallow to deep, each reading the
// already-updated shallower level and the previous deeper level.
void sls_update(const SlsModel& model, const LocalGraph& graph, std::vector<LabelMap>& maps, int rounds);

// init_labels followed by every update iteration.
std::vector<LabelMap> infer_labels(const SlsModel& model, const LocalGraph& graph,
                                   std::span<const FeatureMap> level_features);

// Produces the pyramid-level feature maps of training image i. Called
// concurrently from several threads.
using LevelFeatureFn = std::function<std::vector<FeatureMap>(std::size_t)>;

struct SlsTrainOptions {
  BoostParams params;
  SlsMode mode = SlsMode::full;
  int num_iter = 1;
  // Node rows used to fit each level's classifier; 0 uses every node.
  std::size_t max_samples_per_level = 0;
  std::uint64_t seed = 0;
};

struct SlsTrainResult {
  SlsModel model;
  std::vector<std::vector<LabelMap>> maps;  // final training label pyramids, per image
};

// Fits the initial classifier of each level on broadcast image labels, then
// one update classifier per (iteration, level), earlier ones frozen first.
SlsTrainResult fit_sls(std::size_t image_count, const LevelFeatureFn& features, std::span<const int> targets,
                       const LocalGraph& graph, int class_count, const SlsTrainOptions& options);

void validate(const SlsModel& model, std::size_t levels);

}  // namespace epxhop
