#include "epxhop/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <string>

#include <spdlog/spdlog.h>

#include "epxhop/confusion.hpp"
#include "epxhop/dataset.hpp"
#include "epxhop/error.hpp"
#include "epxhop/parallel.hpp"

namespace epxhop {
namespace {

class Stopwatch {
 public:
  explicit Stopwatch(TrainReport* report) : report_(report) {}
  void lap(const std::string& name) {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    spdlog::info("{} done in {:.1f}s", name, s);
    if (report_) report_->timings.emplace_back(name, s);
  }

 private:
  TrainReport* report_;
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

FeatureMap channel_map(const Image& image, const ColorPCA& color, int channel) {
  auto pq = project_pq(image, color);
  return channel == kChannelP ? std::move(pq.first) : std::move(pq.second);
}

// Pyramid-level features of a fixed list of images, cached in memory when
// they fit the budget and recomputed on demand otherwise.
class LevelFeatureSource {
 public:
  LevelFeatureSource(std::vector<const LabeledImage*> images, const ColorPCA& color, const CascadeModel& cascade,
                     int channel, std::span<const HopRef> levels, std::size_t cache_mb)
      : images_(std::move(images)), color_(color), cascade_(cascade), channel_(channel),
        levels_(levels.begin(), levels.end()) {
    const auto shapes = cascade.output_shapes();
    std::size_t floats = 0;
    for (const auto& ref : levels_) {
      const auto& s = shapes[static_cast<std::size_t>(ref.hop)];
      const int side = ref.pooled ? s.pooled_size : s.size;
      floats += static_cast<std::size_t>(side) * side * s.channels;
    }
    const std::size_t bytes = floats * sizeof(float) * images_.size();
    if (bytes <= cache_mb * (std::size_t{1} << 20)) {
      cache_.resize(images_.size());
      parallel_for(images_.size(), [&](std::size_t i) { cache_[i] = compute(i); });
    } else {
      spdlog::info("level features need {} MB; recomputing on demand", bytes >> 20);
    }
  }

  std::vector<FeatureMap> operator()(std::size_t i) const { return cache_.empty() ? compute(i) : cache_[i]; }

 private:
  std::vector<FeatureMap> compute(std::size_t i) const {
    const auto out = apply_cascade(channel_map(images_[i]->image, color_, channel_), cascade_);
    return level_features(out, levels_);
  }

  std::vector<const LabeledImage*> images_;
  const ColorPCA& color_;
  const CascadeModel& cascade_;
  int channel_;
  std::vector<HopRef> levels_;
  std::vector<std::vector<FeatureMap>> cache_;
};

BoostParams with_seed(BoostParams p, std::uint64_t seed, std::uint64_t salt) {
  p.seed = mix64(seed ^ mix64(salt));
  return p;
}

std::vector<int> targets_for(std::span<const LabeledImage* const> images, std::span<const int> labels) {
  std::vector<int> t;
  t.reserve(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto& img = *images[i];
    if (!img.label) throw Error(Errc::invalid_label, "training image without label", img.id);
    const auto it = std::find(labels.begin(), labels.end(), *img.label);
    if (it == labels.end()) {
      throw Error(Errc::invalid_label, "training label " + std::to_string(*img.label) + " outside the class set",
                  img.id);
    }
    t.push_back(static_cast<int>(it - labels.begin()));
  }
  return t;
}

// Label pyramids of every variant, flattened into rows (image-major).
FeatureMatrix meta_rows(std::span<const LabeledImage* const> images, const ColorPCA& color,
                        const std::array<CascadeModel, 2>& cascades, std::span<const HopRef> levels,
                        const std::array<SlsModel, 2>& sls, const std::array<LocalGraph, 2>& graphs, bool augment,
                        std::uint64_t seed, int width) {
  const std::size_t per_image = augment ? kVariantCount : 1;
  FeatureMatrix x(static_cast<Eigen::Index>(images.size() * per_image), width);
  parallel_for(images.size(), [&](std::size_t i) {
    const auto variants = variants_of(*images[i], augment, seed);
    for (std::size_t v = 0; v < variants.size(); ++v) {
      const auto out = cascade_outputs(variants[v], color, cascades);
      std::array<std::vector<LabelMap>, 2> labels;
      for (int ch = 0; ch < 2; ++ch) {
        labels[static_cast<std::size_t>(ch)] =
            infer_labels(sls[static_cast<std::size_t>(ch)], graphs[static_cast<std::size_t>(ch)],
                         level_features(out[static_cast<std::size_t>(ch)], levels));
      }
      meta_row(labels, x.row(static_cast<Eigen::Index>(i * per_image + v)).data());
    }
  });
  return x;
}

std::array<std::vector<LabelMap>, 2> variant_labels(const std::array<SlsModel, 2>& sls,
                                                    const std::array<LocalGraph, 2>& graphs,
                                                    std::span<const HopRef> levels, const ChannelOutputs& out) {
  std::array<std::vector<LabelMap>, 2> labels;
  for (std::size_t ch = 0; ch < 2; ++ch) {
    labels[ch] = infer_labels(sls[ch], graphs[ch], level_features(out[ch], levels));
  }
  return labels;
}

std::array<LocalGraph, 2> graphs_for(const std::array<CascadeModel, 2>& cascades, std::span<const HopRef> levels) {
  return {level_graph(cascades[0], levels), level_graph(cascades[1], levels)};
}

std::vector<ChannelOutputs> outputs_for(const LabeledImage& image, const Stage1Model& model) {
  std::vector<ChannelOutputs> outs;
  for (const auto& v : variants_of(image, model.augment, model.seed)) {
    outs.push_back(cascade_outputs(v, model.color, model.cascades));
  }
  return outs;
}

int class_index(const Stage1Model& model, int label) {
  const auto it = std::find(model.class_labels.begin(), model.class_labels.end(), label);
  return it == model.class_labels.end() ? -1 : static_cast<int>(it - model.class_labels.begin());
}

int init_width(const CascadeModel& cascade, const HopRef& ref, bool with_children, int dims) {
  return cascade.hops[static_cast<std::size_t>(ref.hop)].output_channels() + (with_children ? dims : 0);
}

void validate_sls(const SlsModel& sls, const CascadeModel& cascade, std::span<const HopRef> levels, int classes) {
  validate(sls, levels.size());
  if (sls.class_count != classes) throw Error(Errc::corrupt_model, "label smoothing class count mismatch");
  for (std::size_t l = 0; l < levels.size(); ++l) {
    const bool kids = sls.mode == SlsMode::full && l > 0;
    if (sls.init[l].feature_count() != init_width(cascade, levels[l], kids, label_dims(classes))) {
      throw Error(Errc::corrupt_model, "initial classifier width does not match the cascade at level " +
                                           std::to_string(l));
    }
  }
}

}  // namespace

std::vector<Image> variants_of(const LabeledImage& image, bool augment, std::uint64_t seed) {
  std::vector<Image> out;
  if (!augment) {
    out.push_back(image.image);
    return out;
  }
  for (auto& v : augment_eightfold(image, seed)) out.push_back(std::move(v.image));
  return out;
}

ChannelOutputs cascade_outputs(const Image& image, const ColorPCA& color,
                               const std::array<CascadeModel, 2>& cascades) {
  auto [p, q] = project_pq(image, color);
  return {apply_cascade(p, cascades[0]), apply_cascade(q, cascades[1])};
}

std::vector<FeatureMap> level_features(const CascadeOutput& output, std::span<const HopRef> levels) {
  std::vector<FeatureMap> out;
  out.reserve(levels.size());
  for (const auto& ref : levels) {
    const auto h = static_cast<std::size_t>(ref.hop);
    if (h >= output.hops.size()) throw Error(Errc::dimension_mismatch, "level references a missing hop");
    if (ref.pooled) {
      if (!output.pooled[h]) throw Error(Errc::dimension_mismatch, "level references a missing pooled map");
      out.push_back(*output.pooled[h]);
    } else {
      out.push_back(output.hops[h]);
    }
  }
  return out;
}

void meta_row(std::span<const std::vector<LabelMap>> channels, float* out) {
  for (const auto& pyramid : channels)
    for (const auto& map : pyramid) out = std::copy(map.data.begin(), map.data.end(), out);
}

int meta_width(std::span<const LocalGraph> graphs, int class_count) {
  std::size_t nodes = 0;
  for (const auto& g : graphs)
    for (std::size_t l = 0; l < g.level_count(); ++l) nodes += g.nodes(l);
  return static_cast<int>(nodes) * label_dims(class_count);
}

LocalGraph level_graph(const CascadeModel& cascade, std::span<const HopRef> levels) {
  std::vector<HopConfig> configs;
  for (const auto& h : cascade.hops) configs.push_back(h.config);
  return build_local_graph(graph_levels(configs, cascade.input_size, levels));
}

Stage1Model train_stage1(std::span<const LabeledImage> train, const RunConfig& config, TrainReport* report) {
  Stopwatch clock(report);
  Stage1Model model;
  model.augment = config.augment;
  model.seed = config.seed;

  if (config.classes.empty()) {
    for (const auto& img : train)
      if (img.label) model.class_labels.push_back(*img.label);
    std::sort(model.class_labels.begin(), model.class_labels.end());
    model.class_labels.erase(std::unique(model.class_labels.begin(), model.class_labels.end()),
                             model.class_labels.end());
  } else {
    model.class_labels = config.classes;
    std::sort(model.class_labels.begin(), model.class_labels.end());
  }
  if (model.class_labels.size() < 2) throw Error(Errc::missing_class, "training needs at least two classes");

  std::vector<const LabeledImage*> images;
  for (const auto& img : train) images.push_back(&img);
  const auto targets = targets_for(images, model.class_labels);
  const int classes = model.class_count();
  std::vector<std::size_t> per_class(static_cast<std::size_t>(classes), 0);
  for (int t : targets) ++per_class[static_cast<std::size_t>(t)];
  for (int c = 0; c < classes; ++c) {
    if (per_class[static_cast<std::size_t>(c)] == 0) {
      throw Error(Errc::missing_class,
                  "class " + std::to_string(model.class_labels[static_cast<std::size_t>(c)]) + " has no training image");
    }
  }
  if (report) report->images = train.size();

  model.color = fit_color_pca(train);
  spdlog::info("color energy fractions {:.4f} {:.4f} {:.4f}", model.color.energy_fractions[0],
               model.color.energy_fractions[1], model.color.energy_fractions[2]);
  clock.lap("color_pca");

  const std::size_t fit_count =
      config.saab_fit_images == 0 ? train.size() : std::min(train.size(), config.saab_fit_images);
  for (int ch = 0; ch < 2; ++ch) {
    std::vector<FeatureMap> maps(fit_count);
    parallel_for(fit_count, [&](std::size_t j) {
      maps[j] = channel_map(train[j * train.size() / fit_count].image, model.color, ch);
    });
    const auto configs = hop_configs(config, ch);
    model.cascades[static_cast<std::size_t>(ch)] = fit_cascade(maps, configs, {config.mode, config.saab_bias});
    if (report) report->shapes[static_cast<std::size_t>(ch)] = model.cascades[static_cast<std::size_t>(ch)].output_shapes();
  }
  clock.lap("cascades");

  const auto graphs = graphs_for(model.cascades, model.levels);
  for (int ch = 0; ch < 2; ++ch) {
    const auto c = static_cast<std::size_t>(ch);
    LevelFeatureSource source(images, model.color, model.cascades[c], ch, model.levels, config.feature_cache_mb);
    SlsTrainOptions opts;
    opts.params = config.pixel_params;
    opts.mode = config.sls_mode;
    opts.num_iter = config.num_iter_stage1;
    opts.max_samples_per_level = config.max_pixel_samples;
    opts.seed = mix64(config.seed ^ (0x5150 + c));
    model.sls[c] = fit_sls(images.size(), std::cref(source), targets, graphs[c], classes, opts).model;
    clock.lap(ch == kChannelP ? "pixel_classifiers_p" : "pixel_classifiers_q");
  }

  const int width = meta_width(graphs, classes);
  const FeatureMatrix x = meta_rows(images, model.color, model.cascades, model.levels, model.sls, graphs,
                                    config.augment, config.seed, width);
  const std::size_t per_image = config.augment ? kVariantCount : 1;
  std::vector<int> y;
  y.reserve(static_cast<std::size_t>(x.rows()));
  for (int t : targets) y.insert(y.end(), per_image, t);
  if (report) {
    report->meta_rows = static_cast<std::size_t>(x.rows());
    report->meta_width = width;
  }
  model.meta = fit_boosted(x, y, classes, with_seed(config.meta_params, config.seed, 0x3e7a));
  if (config.channel_ablation) {
    const int half = width / 2;
    const FeatureMatrix xp = x.leftCols(half);
    model.meta_p = fit_boosted(xp, y, classes, with_seed(config.meta_params, config.seed, 0x3e7b));
    const FeatureMatrix xq = x.rightCols(width - half);
    model.meta_q = fit_boosted(xq, y, classes, with_seed(config.meta_params, config.seed, 0x3e7c));
  }
  clock.lap("meta");
  return model;
}

Stage1Decision decide_stage1(const Stage1Model& model, std::span<const ChannelOutputs> variants) {
  const auto graphs = graphs_for(model.cascades, model.levels);
  const int classes = model.class_count();
  const int width = meta_width(graphs, classes);
  const bool ablation = model.meta_p && model.meta_q;

  Stage1Decision d;
  d.fused = Eigen::VectorXd::Zero(classes);
  if (ablation) {
    d.p_only = Eigen::VectorXd::Zero(classes);
    d.q_only = Eigen::VectorXd::Zero(classes);
  }
  std::vector<float> row(static_cast<std::size_t>(width));
  std::vector<double> p(static_cast<std::size_t>(classes));
  for (const auto& out : variants) {
    const auto labels = variant_labels(model.sls, graphs, model.levels, out);
    meta_row(labels, row.data());
    model.meta.predict_proba_row(row.data(), p);
    d.fused += Eigen::Map<const Eigen::VectorXd>(p.data(), classes);
    if (ablation) {
      model.meta_p->predict_proba_row(row.data(), p);
      d.p_only += Eigen::Map<const Eigen::VectorXd>(p.data(), classes);
      model.meta_q->predict_proba_row(row.data() + width / 2, p);
      d.q_only += Eigen::Map<const Eigen::VectorXd>(p.data(), classes);
    }
  }
  const auto n = static_cast<double>(variants.size());
  d.fused /= n;
  if (ablation) {
    d.p_only /= n;
    d.q_only /= n;
  }
  return d;
}

Stage1Decision predict_stage1(const Stage1Model& model, const LabeledImage& image) {
  return decide_stage1(model, outputs_for(image, model));
}

std::array<std::vector<LabelMap>, 2> stage1_label_maps(const Stage1Model& model, const Image& image) {
  const auto graphs = graphs_for(model.cascades, model.levels);
  return variant_labels(model.sls, graphs, model.levels, cascade_outputs(image, model.color, model.cascades));
}

PairModel train_pair_model(int a, int b, std::span<const LabeledImage> train, const Stage1Model& stage1,
                           const RunConfig& config, TrainReport* report) {
  if (a > b) std::swap(a, b);
  if (a == b || class_index(stage1, a) < 0 || class_index(stage1, b) < 0) {
    throw Error(Errc::invalid_argument,
                "pair (" + std::to_string(a) + ", " + std::to_string(b) + ") is not a pair of stage-1 classes");
  }
  Stopwatch clock(report);
  PairModel pair;
  pair.a = a;
  pair.b = b;
  pair.augment = config.augment;
  pair.seed = config.seed;

  std::vector<const LabeledImage*> images;
  for (const auto& img : train)
    if (img.label && (*img.label == a || *img.label == b)) images.push_back(&img);
  const std::array<int, 2> labels{a, b};
  const auto targets = targets_for(images, labels);
  for (int c = 0; c < 2; ++c) {
    if (std::find(targets.begin(), targets.end(), c) == targets.end()) {
      throw Error(Errc::missing_class, "class " + std::to_string(labels[static_cast<std::size_t>(c)]) +
                                           " has no training image");
    }
  }
  if (report) report->images = images.size();

  const auto graphs = graphs_for(stage1.cascades, pair.levels);
  const std::uint64_t pair_key = mix64(config.seed ^ (static_cast<std::uint64_t>(a) << 8 | static_cast<std::uint64_t>(b)));
  for (std::size_t c = 0; c < 2; ++c) {
    LevelFeatureSource source(images, stage1.color, stage1.cascades[c], static_cast<int>(c), pair.levels,
                              config.feature_cache_mb);
    SlsTrainOptions opts;
    opts.params = config.pixel_params;
    opts.mode = config.sls_mode;
    opts.num_iter = config.num_iter_stage2;
    opts.max_samples_per_level = config.max_pixel_samples;
    opts.seed = mix64(pair_key ^ (0x5150 + c));
    pair.sls[c] = fit_sls(images.size(), std::cref(source), targets, graphs[c], 2, opts).model;
  }
  clock.lap("pair_" + std::to_string(a) + "_" + std::to_string(b) + "_sls");

  const int width = meta_width(graphs, 2);
  const FeatureMatrix x =
      meta_rows(images, stage1.color, stage1.cascades, pair.levels, pair.sls, graphs, config.augment, config.seed, width);
  const std::size_t per_image = config.augment ? kVariantCount : 1;
  std::vector<int> y;
  for (int t : targets) y.insert(y.end(), per_image, t);
  if (report) {
    report->meta_rows = static_cast<std::size_t>(x.rows());
    report->meta_width = width;
  }
  pair.meta = fit_boosted(x, y, 2, with_seed(config.meta_params, pair_key, 0x3e7a));
  clock.lap("pair_" + std::to_string(a) + "_" + std::to_string(b) + "_meta");
  return pair;
}

double decide_pair(const PairModel& pair, const std::array<CascadeModel, 2>& cascades,
                   std::span<const ChannelOutputs> variants) {
  const auto graphs = graphs_for(cascades, pair.levels);
  std::vector<float> row(static_cast<std::size_t>(meta_width(graphs, 2)));
  std::array<double, 2> p{};
  double sum = 0.0;
  for (const auto& out : variants) {
    meta_row(variant_labels(pair.sls, graphs, pair.levels, out), row.data());
    pair.meta.predict_proba_row(row.data(), p);
    sum += p[1];
  }
  return sum / static_cast<double>(variants.size());
}

double predict_pair(const PairModel& pair, const Stage1Model& stage1, const LabeledImage& image) {
  return decide_pair(pair, stage1.cascades, outputs_for(image, stage1));
}

int predict_final(const Stage1Model& stage1, std::span<const PairModel> pairs, const LabeledImage& image,
                  int resolved_k) {
  const auto outs = outputs_for(image, stage1);
  const auto d = decide_stage1(stage1, outs);
  const auto top = top_m(std::span<const double>(d.fused.data(), static_cast<std::size_t>(d.fused.size())), 2);
  const int la = stage1.class_labels[static_cast<std::size_t>(std::min(top[0], top[1]))];
  const int lb = stage1.class_labels[static_cast<std::size_t>(std::max(top[0], top[1]))];
  const std::size_t usable = resolved_k < 0 ? pairs.size() : std::min(pairs.size(), static_cast<std::size_t>(resolved_k));
  for (std::size_t k = 0; k < usable; ++k) {
    if (pairs[k].a == la && pairs[k].b == lb) {
      return decide_pair(pairs[k], stage1.cascades, outs) > 0.5 ? lb : la;
    }
  }
  return stage1.class_labels[static_cast<std::size_t>(top[0])];
}

Eigen::MatrixXd stage1_decisions(const Stage1Model& model, std::span<const LabeledImage> images) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(images.size()), model.class_count());
  parallel_for(images.size(), [&](std::size_t i) {
    out.row(static_cast<Eigen::Index>(i)) = predict_stage1(model, images[i]).fused.transpose();
  });
  return out;
}

EvaluationReport evaluate(const Stage1Model& stage1, std::span<const PairModel> pairs,
                          std::span<const LabeledImage> test, int resolve_top_k) {
  const int classes = stage1.class_count();
  const auto n = test.size();
  std::vector<int> truth(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& img = test[i];
    truth[i] = img.label ? class_index(stage1, *img.label) : -1;
    if (truth[i] < 0) throw Error(Errc::invalid_label, "test image label outside the model's classes", img.id);
  }

  std::map<std::pair<int, int>, std::size_t> pair_index;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const int ia = class_index(stage1, pairs[k].a);
    const int ib = class_index(stage1, pairs[k].b);
    if (ia < 0 || ib < 0) throw Error(Errc::invalid_argument, "pair model classes outside the stage-1 model");
    pair_index.emplace(std::pair{ia, ib}, k);
  }

  const bool ablation = stage1.meta_p && stage1.meta_q;
  Eigen::MatrixXd fused(static_cast<Eigen::Index>(n), classes);
  Eigen::MatrixXd p_only = ablation ? Eigen::MatrixXd(static_cast<Eigen::Index>(n), classes) : Eigen::MatrixXd();
  Eigen::MatrixXd q_only = p_only;
  std::vector<double> prob_b(n, std::numeric_limits<double>::quiet_NaN());
  parallel_for(n, [&](std::size_t i) {
    const auto outs = outputs_for(test[i], stage1);
    const auto d = decide_stage1(stage1, outs);
    const auto row = static_cast<Eigen::Index>(i);
    fused.row(row) = d.fused.transpose();
    if (ablation) {
      p_only.row(row) = d.p_only.transpose();
      q_only.row(row) = d.q_only.transpose();
    }
    const auto top = top_m(std::span<const double>(d.fused.data(), static_cast<std::size_t>(classes)), 2);
    const auto it = pair_index.find({std::min(top[0], top[1]), std::max(top[0], top[1])});
    if (it != pair_index.end()) prob_b[i] = decide_pair(pairs[it->second], stage1.cascades, outs);
  });

  EvaluationReport report;
  report.class_labels = stage1.class_labels;
  const auto stage1_pred = argmax_rows(fused);
  report.stage1_top1 = accuracy(truth, stage1_pred);
  report.stage1_top2 = top_k_accuracy(truth, fused, 2);

  const auto sets = build_confusion_sets(fused);
  std::vector<int> rank(n, 0);
  for (const auto& s : sets)
    for (auto m : s.members) rank[m] = s.priority_rank;

  auto predictions = [&](std::size_t k) {
    std::vector<int> pred = stage1_pred;
    for (std::size_t i = 0; i < n; ++i) {
      if (static_cast<std::size_t>(rank[i]) < k && !std::isnan(prob_b[i])) {
        const auto& s = sets[static_cast<std::size_t>(rank[i])];
        pred[i] = prob_b[i] > 0.5 ? s.b : s.a;
      }
    }
    return pred;
  };
  for (std::size_t k = 0; k <= sets.size(); ++k) {
    report.curve.push_back({static_cast<int>(k), accuracy(truth, predictions(k))});
  }
  const std::size_t headline = resolve_top_k < 0 ? sets.size() : std::min(sets.size(), static_cast<std::size_t>(resolve_top_k));
  const auto final_pred = predictions(headline);
  report.final_top1 = accuracy(truth, final_pred);
  report.confusion = confusion_matrix(truth, final_pred, classes);

  for (const auto& s : sets) {
    PairAccuracy pa;
    pa.a = stage1.class_labels[static_cast<std::size_t>(s.a)];
    pa.b = stage1.class_labels[static_cast<std::size_t>(s.b)];
    pa.members = s.members.size();
    pa.resolved = static_cast<std::size_t>(s.priority_rank) < headline && pair_index.count({s.a, s.b}) > 0;
    std::size_t hit1 = 0;
    std::size_t hitf = 0;
    for (auto m : s.members) {
      hit1 += stage1_pred[m] == truth[m];
      hitf += final_pred[m] == truth[m];
    }
    pa.stage1_accuracy = static_cast<double>(hit1) / static_cast<double>(s.members.size());
    pa.final_accuracy = static_cast<double>(hitf) / static_cast<double>(s.members.size());
    report.pairs.push_back(pa);
  }

  if (ablation) {
    report.accuracy.push_back({"P-only", accuracy(truth, argmax_rows(p_only)), top_k_accuracy(truth, p_only, 2)});
    report.accuracy.push_back({"Q-only", accuracy(truth, argmax_rows(q_only)), top_k_accuracy(truth, q_only, 2)});
  }
  report.accuracy.push_back({"P+Q", report.stage1_top1, report.stage1_top2});
  report.accuracy.push_back({"two-stage", report.final_top1, report.stage1_top2});
  return report;
}

void validate(const Stage1Model& model) {
  const int classes = model.class_count();
  if (classes < 2 || !std::is_sorted(model.class_labels.begin(), model.class_labels.end()) ||
      std::adjacent_find(model.class_labels.begin(), model.class_labels.end()) != model.class_labels.end()) {
    throw Error(Errc::corrupt_model, "stage-1 class labels must be sorted, distinct and at least two");
  }
  validate(model.color);
  for (const auto& c : model.cascades) validate(c);
  const auto graphs = graphs_for(model.cascades, model.levels);
  for (std::size_t ch = 0; ch < 2; ++ch) validate_sls(model.sls[ch], model.cascades[ch], model.levels, classes);
  const int width = meta_width(graphs, classes);
  validate(model.meta);
  if (model.meta.class_count() != classes || model.meta.feature_count() != width) {
    throw Error(Errc::corrupt_model, "meta classifier shape does not match the label pyramids");
  }
  if (model.meta_p.has_value() != model.meta_q.has_value()) {
    throw Error(Errc::corrupt_model, "channel ablation classifiers must come in pairs");
  }
  if (model.meta_p) {
    validate(*model.meta_p);
    validate(*model.meta_q);
    if (model.meta_p->feature_count() != width / 2 || model.meta_q->feature_count() != width - width / 2) {
      throw Error(Errc::corrupt_model, "channel ablation classifier widths are inconsistent");
    }
  }
}

void validate(const PairModel& pair, const Stage1Model& stage1) {
  if (!(pair.a < pair.b) || class_index(stage1, pair.a) < 0 || class_index(stage1, pair.b) < 0) {
    throw Error(Errc::corrupt_model, "pair model classes are not a stage-1 class pair");
  }
  for (std::size_t ch = 0; ch < 2; ++ch) validate_sls(pair.sls[ch], stage1.cascades[ch], pair.levels, 2);
  const auto graphs = graphs_for(stage1.cascades, pair.levels);
  validate(pair.meta);
  if (pair.meta.class_count() != 2 || pair.meta.feature_count() != meta_width(graphs, 2)) {
    throw Error(Errc::corrupt_model, "pair meta classifier shape does not match the label pyramids");
  }
}

}  // namespace epxhop
