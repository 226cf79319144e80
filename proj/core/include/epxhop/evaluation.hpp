#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace epxhop {

double accuracy(std::span<const int> truth, std::span<const int> predicted);

// Fraction of rows whose truth is among the k highest-scoring columns.
double top_k_accuracy(std::span<const int> truth, const Eigen::MatrixXd& decisions, int k);

std::vector<int> argmax_rows(const Eigen::MatrixXd& decisions);

// Row-normalised: entry (t, p) is the share of class-t samples predicted as p.
// Rows of classes absent from truth stay zero.
Eigen::MatrixXd confusion_matrix(std::span<const int> truth, std::span<const int> predicted, int classes);

struct AccuracyRow {
  std::string name;
  double top1 = 0.0;
  double top2 = 0.0;
};

struct CurvePoint {
  int resolved_sets = 0;
  double accuracy = 0.0;
};

struct PairAccuracy {
  int a = 0;  // class labels
  int b = 0;
  std::size_t members = 0;
  double stage1_accuracy = 0.0;
  double final_accuracy = 0.0;
  bool resolved = false;
};

struct EvaluationReport {
  std::vector<int> class_labels;
  std::vector<AccuracyRow> accuracy;
  Eigen::MatrixXd confusion;  // of the final predictions
  std::vector<CurvePoint> curve;
  std::vector<PairAccuracy> pairs;  // by priority rank
  double stage1_top1 = 0.0;
  double stage1_top2 = 0.0;
  double final_top1 = 0.0;
};

// Writes confusion_matrix.csv, accuracy.csv, resolved_curve.csv and
// pair_accuracy.csv into dir.
void write_report_csv(const EvaluationReport& report, const std::filesystem::path& dir);

}  // namespace epxhop
