#include <gtest/gtest.h>

#include "epxhop/confusion.hpp"
#include "epxhop/dataset.hpp"
#include "epxhop/error.hpp"
#include "epxhop/pipeline.hpp"
#include "synthetic.hpp"

namespace epxhop {
namespace {

struct Trained {
  std::vector<LabeledImage> train2, train4, test4;
  Stage1Model two;
  TrainReport two_report;
  Stage1Model four;
  PairModel pair;
  TrainReport pair_report;
};

const Trained& trained() {
  static const Trained t = [] {
    Trained t;
    const int c2[] = {3, 5};
    const int c4[] = {3, 5, 8, 9};
    t.train2 = testing::synthetic_images(c2, 10, 1);
    t.train4 = testing::synthetic_images(c4, 8, 2);
    t.test4 = testing::synthetic_images(c4, 5, 3, 1000);
    const RunConfig config = testing::quick_config();
    t.two = train_stage1(t.train2, config, &t.two_report);
    t.four = train_stage1(t.train4, config);
    t.pair = train_pair_model(3, 5, t.train4, t.four, config, &t.pair_report);
    return t;
  }();
  return t;
}

TEST(Stage1, TwoClassShapes) {
  const auto& t = trained();
  EXPECT_EQ(t.two.class_labels, (std::vector<int>{3, 5}));
  EXPECT_EQ(t.two_report.meta_width, 2 * (49 + 25 + 9) * 1);
  EXPECT_EQ(t.two.meta.feature_count(), 166);
  EXPECT_EQ(t.two_report.meta_rows, t.train2.size() * 8);
  EXPECT_EQ(t.two.sls[0].num_iter(), 1);
  EXPECT_NO_THROW(validate(t.two));
  ASSERT_TRUE(t.two.meta_p && t.two.meta_q);
  EXPECT_EQ(t.two.meta_p->feature_count(), 83);

  const auto& shapes = t.two_report.shapes[0];
  ASSERT_EQ(shapes.size(), 4u);
  EXPECT_EQ(shapes[0], (HopShape{32, 24, 15}));
  EXPECT_EQ(shapes[1], (HopShape{15, 144, 7}));
  EXPECT_EQ(shapes[2], (HopShape{5, 203, 0}));
  EXPECT_EQ(shapes[3], (HopShape{3, 211, 0}));
}

TEST(Stage1, MetaWidthArithmetic) {
  const auto& t = trained();
  const std::array<LocalGraph, 2> graphs{level_graph(t.four.cascades[0], kStage1Levels),
                                         level_graph(t.four.cascades[1], kStage1Levels)};
  EXPECT_EQ(meta_width(graphs, 10), 2 * 83 * 9);
  EXPECT_EQ(meta_width(graphs, 4), 2 * 83 * 3);
  EXPECT_EQ(t.four.meta.feature_count(), 2 * 83 * 3);
}

TEST(Stage1, DecisionsAreSimplexPoints) {
  const auto& t = trained();
  for (std::size_t i = 0; i < t.test4.size(); i += 3) {
    const auto d = predict_stage1(t.four, t.test4[i]);
    ASSERT_EQ(d.fused.size(), 4);
    EXPECT_NEAR(d.fused.sum(), 1.0, 1e-6);
    EXPECT_NEAR(d.p_only.sum(), 1.0, 1e-6);
    EXPECT_NEAR(d.q_only.sum(), 1.0, 1e-6);
    EXPECT_GE(d.fused.minCoeff(), 0.0);
  }
}

TEST(Stage1, ZeroRoundMetaIsUniform) {
  Stage1Model m = trained().two;
  m.meta = BoostedModel(2, m.meta.feature_count(), BoostParams{});
  const auto d = predict_stage1(m, trained().train2[0]);
  EXPECT_DOUBLE_EQ(d.fused[0], 0.5);
  EXPECT_DOUBLE_EQ(d.fused[1], 0.5);
}

TEST(Stage1, IdenticalVariantsAverageToOne) {
  const auto& t = trained();
  const LabeledImage& img = t.test4[0];
  const ChannelOutputs one = cascade_outputs(img.image, t.four.color, t.four.cascades);
  const std::vector<ChannelOutputs> eight(8, one);
  const auto single = decide_stage1(t.four, std::span(&one, 1));
  const auto many = decide_stage1(t.four, eight);
  EXPECT_LT((single.fused - many.fused).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Stage1, AugmentOffUsesOneVariant) {
  const auto& t = trained();
  EXPECT_EQ(variants_of(t.train2[0], false, 0).size(), 1u);
  EXPECT_EQ(variants_of(t.train2[0], true, 0).size(), 8u);
  RunConfig config = testing::quick_config();
  config.augment = false;
  config.channel_ablation = false;
  TrainReport report;
  const auto m = train_stage1(std::span(t.train2).first(8), config, &report);
  EXPECT_EQ(report.meta_rows, 8u);
  EXPECT_FALSE(m.meta_p);
}

TEST(Stage1, MissingClassIsAnError) {
  RunConfig config = testing::quick_config();
  config.classes = {3, 5, 7};
  try {
    train_stage1(trained().train2, config);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::missing_class);
  }
  config.classes = {3, 7};
  EXPECT_THROW(train_stage1(trained().train2, config), Error);  // label 5 outside the set
}

TEST(PairModel, Shapes) {
  const auto& t = trained();
  EXPECT_EQ(t.pair.a, 3);
  EXPECT_EQ(t.pair.b, 5);
  EXPECT_EQ(t.pair_report.meta_width, 2 * (225 + 25 + 9));
  EXPECT_EQ(t.pair.meta.feature_count(), 518);
  EXPECT_EQ(t.pair_report.images, 16u);
  for (const auto& sls : t.pair.sls) {
    EXPECT_EQ(sls.num_iter(), 3);
    for (const auto& it : sls.updates)
      for (const auto& h : it) EXPECT_EQ(h.feature_count(), 4);
  }
  EXPECT_NO_THROW(validate(t.pair, t.four));

  const auto outs = cascade_outputs(t.test4[0].image, t.four.color, t.four.cascades);
  const auto features = level_features(outs[0], kStage2Levels);
  const LocalGraph g = level_graph(t.four.cascades[0], kStage2Levels);
  const auto maps = infer_labels(t.pair.sls[0], g, features);
  ASSERT_EQ(maps.size(), 3u);
  EXPECT_EQ(maps[0].size, 15);
  EXPECT_EQ(maps[1].size, 5);
  EXPECT_EQ(maps[2].size, 3);
  for (const auto& m : maps) EXPECT_EQ(m.channels, 1);

  const double p = predict_pair(t.pair, t.four, t.test4[0]);
  EXPECT_GE(p, 0.0);
  EXPECT_LE(p, 1.0);
  EXPECT_THROW(train_pair_model(3, 7, t.train4, t.four, testing::quick_config()), Error);
}

TEST(TwoStage, ZeroResolvedEqualsStage1) {
  const auto& t = trained();
  const std::vector<PairModel> pairs{t.pair};
  for (const auto& img : t.test4) {
    const auto d = predict_stage1(t.four, img);
    Eigen::Index arg = 0;
    d.fused.maxCoeff(&arg);
    EXPECT_EQ(predict_final(t.four, pairs, img, 0), t.four.class_labels[static_cast<std::size_t>(arg)]);
  }
}

TEST(TwoStage, PairDecisionStaysInsideTopTwo) {
  const auto& t = trained();
  PairModel undecided = t.pair;
  undecided.meta = BoostedModel(2, undecided.meta.feature_count(), BoostParams{});
  const std::vector<PairModel> pairs{t.pair};
  const std::vector<PairModel> ties{undecided};
  for (const auto& img : t.test4) {
    const auto d = predict_stage1(t.four, img);
    std::vector<double> soft(d.fused.data(), d.fused.data() + d.fused.size());
    auto top = top_m(soft, 2);
    std::vector<int> labels{t.four.class_labels[top[0]], t.four.class_labels[top[1]]};
    std::sort(labels.begin(), labels.end());
    const int final_label = predict_final(t.four, pairs, img);
    if (labels == std::vector<int>{3, 5}) {
      EXPECT_TRUE(final_label == 3 || final_label == 5);
      EXPECT_EQ(predict_final(t.four, ties, img), 3);  // p = 0.5 does not beat a
    } else {
      EXPECT_EQ(final_label, t.four.class_labels[top[0]]);
    }
  }
}

TEST(TwoStage, EvaluateInvariants) {
  const auto& t = trained();
  const std::vector<PairModel> pairs{t.pair};
  const EvaluationReport r = evaluate(t.four, pairs, t.test4);
  EXPECT_LE(r.final_top1, r.stage1_top2 + 1e-12);
  ASSERT_FALSE(r.curve.empty());
  EXPECT_EQ(r.curve[0].resolved_sets, 0);
  EXPECT_DOUBLE_EQ(r.curve[0].accuracy, r.stage1_top1);
  for (const auto& pt : r.curve) EXPECT_LE(pt.accuracy, r.stage1_top2 + 1e-12);
  for (Eigen::Index i = 0; i < r.confusion.rows(); ++i) EXPECT_NEAR(r.confusion.row(i).sum(), 1.0, 1e-9);
  std::vector<std::string> names;
  for (const auto& row : r.accuracy) names.push_back(row.name);
  EXPECT_EQ(names, (std::vector<std::string>{"P-only", "Q-only", "P+Q", "two-stage"}));
  std::size_t members = 0;
  for (const auto& p : r.pairs) members += p.members;
  EXPECT_EQ(members, t.test4.size());

  const EvaluationReport none = evaluate(t.four, pairs, t.test4, 0);
  EXPECT_DOUBLE_EQ(none.final_top1, none.stage1_top1);
}

TEST(TwoStage, RetrainingIsDeterministic) {
  const auto& t = trained();
  const auto again = train_stage1(t.train2, testing::quick_config());
  EXPECT_EQ(again.meta, t.two.meta);
  EXPECT_EQ(again.sls[1].init, t.two.sls[1].init);
  EXPECT_EQ(stage1_decisions(again, t.test4), stage1_decisions(t.two, t.test4));
}

}  // namespace
}  // namespace epxhop
