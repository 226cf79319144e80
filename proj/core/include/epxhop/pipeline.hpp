#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "epxhop/cascade.hpp"
#include "epxhop/color_pca.hpp"
#include "epxhop/evaluation.hpp"
#include "epxhop/image.hpp"
#include "epxhop/label_smoothing.hpp"
#include "epxhop/local_graph.hpp"
#include "epxhop/run_config.hpp"

namespace epxhop {

// Pyramid levels: stage 1 uses pooled hop-2, hop-3, hop-4; pair models use
// hop-2 before pooling for higher resolution.
inline const std::vector<HopRef> kStage1Levels{{1, true}, {2, false}, {3, false}};
inline const std::vector<HopRef> kStage2Levels{{1, false}, {2, false}, {3, false}};

inline constexpr int kChannelP = 0;
inline constexpr int kChannelQ = 1;

struct Stage1Model {
  std::vector<int> class_labels;  // dataset labels; decision index i refers to class_labels[i]
  ColorPCA color;
  std::array<CascadeModel, 2> cascades;  // P, Q
  std::vector<HopRef> levels = kStage1Levels;
  std::array<SlsModel, 2> sls;
  BoostedModel meta;
  std::optional<BoostedModel> meta_p;  // channel ablation
  std::optional<BoostedModel> meta_q;
  bool augment = true;
  std::uint64_t seed = 0;

  int class_count() const noexcept { return static_cast<int>(class_labels.size()); }
};

struct PairModel {
  int a = 0;  // dataset labels, a < b
  int b = 0;
  std::vector<HopRef> levels = kStage2Levels;
  std::array<SlsModel, 2> sls;
  BoostedModel meta;  // class 0 = a, class 1 = b
  bool augment = true;
  std::uint64_t seed = 0;
};

struct TrainReport {
  std::vector<std::pair<std::string, double>> timings;  // seconds
  std::array<std::vector<HopShape>, 2> shapes;
  std::size_t images = 0;
  std::size_t meta_rows = 0;
  int meta_width = 0;
};

// Cascade outputs of one image for both color channels.
using ChannelOutputs = std::array<CascadeOutput, 2>;

// Images presented to the classifiers: the eight variants, or the image
// alone when augmentation is off.
std::vector<Image> variants_of(const LabeledImage& image, bool augment, std::uint64_t seed);

ChannelOutputs cascade_outputs(const Image& image, const ColorPCA& color,
                               const std::array<CascadeModel, 2>& cascades);

// Feature maps of the requested pyramid levels.
std::vector<FeatureMap> level_features(const CascadeOutput& output, std::span<const HopRef> levels);

// Flattened label pyramids of the given channels, in channel then level
// then node order.
void meta_row(std::span<const std::vector<LabelMap>> channels, float* out);
int meta_width(std::span<const LocalGraph> graphs, int class_count);

LocalGraph level_graph(const CascadeModel& cascade, std::span<const HopRef> levels);

// Fits color PCA, both cascades, per-level pixel classifiers with label
// smoothing, and the meta classifier over augmented label maps. Throws
// Errc::missing_class when a configured class has no training image.
Stage1Model train_stage1(std::span<const LabeledImage> train, const RunConfig& config,
                         TrainReport* report = nullptr);

struct Stage1Decision {
  Eigen::VectorXd fused;   // P + Q meta
  Eigen::VectorXd p_only;  // empty without channel ablation
  Eigen::VectorXd q_only;
};

// Soft decisions averaged over the image's variants.
Stage1Decision predict_stage1(const Stage1Model& model, const LabeledImage& image);
Stage1Decision decide_stage1(const Stage1Model& model, std::span<const ChannelOutputs> variants);

// Label pyramids of the unaugmented image, per channel.
std::array<std::vector<LabelMap>, 2> stage1_label_maps(const Stage1Model& model, const Image& image);

// One-vs-one model for classes a and b (dataset labels) on top of the
// stage-1 cascades, with full label smoothing.
PairModel train_pair_model(int a, int b, std::span<const LabeledImage> train, const Stage1Model& stage1,
                           const RunConfig& config, TrainReport* report = nullptr);

// Probability of class b, averaged over the image's variants.
double predict_pair(const PairModel& pair, const Stage1Model& stage1, const LabeledImage& image);
double decide_pair(const PairModel& pair, const std::array<CascadeModel, 2>& cascades,
                   std::span<const ChannelOutputs> variants);

// Dataset label of the final decision. Pair models are consulted in the
// given order; only the first resolved_k (all when negative) can fire.
int predict_final(const Stage1Model& stage1, std::span<const PairModel> pairs, const LabeledImage& image,
                  int resolved_k = -1);

// Stage-1 and two-stage metrics on a labeled test set. Confusion sets are
// ranked on this set; resolve_top_k (all when negative) limits which ranked
// sets are resolved for the headline numbers.
EvaluationReport evaluate(const Stage1Model& stage1, std::span<const PairModel> pairs,
                          std::span<const LabeledImage> test, int resolve_top_k = -1);

// Per-image stage-1 fused decisions, one row per image.
Eigen::MatrixXd stage1_decisions(const Stage1Model& model, std::span<const LabeledImage> images);

void validate(const Stage1Model& model);
void validate(const PairModel& pair, const Stage1Model& stage1);

}  // namespace epxhop
