#include <gtest/gtest.h>

#include <fstream>
#include <random>

#include "epxhop/error.hpp"
#include "epxhop/evaluation.hpp"
#include "epxhop/heatmap.hpp"
#include "synthetic.hpp"

namespace epxhop {
namespace {

TEST(Metrics, PerfectPredictorGivesIdentity) {
  std::vector<int> truth;
  for (int i = 0; i < 50; ++i) truth.push_back(i % 5);
  EXPECT_DOUBLE_EQ(accuracy(truth, truth), 1.0);
  const Eigen::MatrixXd cm = confusion_matrix(truth, truth, 5);
  EXPECT_EQ(cm, Eigen::MatrixXd::Identity(5, 5));
}

TEST(Metrics, UniformRandomDiagonal) {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> pick(0, 9);
  std::vector<int> truth, pred;
  for (int i = 0; i < 100000; ++i) {
    truth.push_back(i % 10);
    pred.push_back(pick(rng));
  }
  const Eigen::MatrixXd cm = confusion_matrix(truth, pred, 10);
  for (int r = 0; r < 10; ++r) {
    EXPECT_NEAR(cm.row(r).sum(), 1.0, 1e-9);
    EXPECT_NEAR(cm(r, r), 0.1, 0.01);
  }
}

TEST(Metrics, AbsentClassRowStaysZero) {
  const std::vector<int> truth{0, 0, 2}, pred{0, 1, 2};
  const Eigen::MatrixXd cm = confusion_matrix(truth, pred, 3);
  EXPECT_EQ(cm.row(1).sum(), 0.0);
  EXPECT_DOUBLE_EQ(cm(0, 1), 0.5);
  EXPECT_THROW(confusion_matrix(truth, std::vector<int>{0, 3, 1}, 3), Error);
}

TEST(Metrics, TopK) {
  Eigen::MatrixXd d(3, 3);
  d << 0.5, 0.3, 0.2,  //
      0.2, 0.1, 0.7,   //
      0.4, 0.4, 0.2;
  const std::vector<int> truth{1, 1, 1};
  EXPECT_DOUBLE_EQ(top_k_accuracy(truth, d, 1), 0.0);
  EXPECT_DOUBLE_EQ(top_k_accuracy(truth, d, 2), 2.0 / 3.0);
  EXPECT_EQ(argmax_rows(d), (std::vector<int>{0, 2, 0}));
}

TEST(Report, CsvFiles) {
  EvaluationReport r;
  r.class_labels = {3, 5};
  r.accuracy = {{"P+Q", 0.7, 1.0}, {"two-stage", 0.75, 1.0}};
  r.confusion = Eigen::MatrixXd::Identity(2, 2);
  r.curve = {{0, 0.7}, {1, 0.75}};
  r.pairs = {{3, 5, 10, 0.7, 0.75, true}};
  const auto dir = testing::temp_dir("csv");
  write_report_csv(r, dir);
  for (const char* name : {"confusion_matrix.csv", "accuracy.csv", "resolved_curve.csv", "pair_accuracy.csv"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / name)) << name;
  }
  std::ifstream curve(dir / "resolved_curve.csv");
  std::string header, first;
  std::getline(curve, header);
  std::getline(curve, first);
  EXPECT_EQ(first.substr(0, 2), "0,");
  std::filesystem::remove_all(dir);
}

TEST(Heatmap, PixelValuesAndPng) {
  FeatureMap m(2, 2);
  m.at(0, 0, 1) = 0.5f;
  m.at(1, 1, 1) = 1.0f;
  m.at(0, 1, 1) = 0.002f;
  EXPECT_EQ(heatmap_pixels(m, 1), (std::vector<std::uint8_t>{128, 1, 0, 255}));
  const auto dir = testing::temp_dir("png");
  write_heatmap_png(dir / "h.png", m, 1, 4);
  std::ifstream in(dir / "h.png", std::ios::binary);
  char sig[8] = {};
  in.read(sig, 8);
  EXPECT_EQ(std::string(sig + 1, 3), "PNG");
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace epxhop
