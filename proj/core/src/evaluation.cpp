#include "epxhop/evaluation.hpp"

#include <fstream>
#include <iomanip>

#include "epxhop/confusion.hpp"
#include "epxhop/error.hpp"

namespace epxhop {
namespace {

std::ofstream open_csv(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::io, "cannot write " + path.string());
  out << std::setprecision(9);
  return out;
}

}  // namespace

double accuracy(std::span<const int> truth, std::span<const int> predicted) {
  if (truth.size() != predicted.size()) throw Error(Errc::dimension_mismatch, "accuracy: length mismatch");
  if (truth.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += truth[i] == predicted[i];
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

double top_k_accuracy(std::span<const int> truth, const Eigen::MatrixXd& decisions, int k) {
  if (static_cast<Eigen::Index>(truth.size()) != decisions.rows()) {
    throw Error(Errc::dimension_mismatch, "top_k_accuracy: length mismatch");
  }
  if (truth.empty()) return 0.0;
  std::size_t hits = 0;
  std::vector<double> row(static_cast<std::size_t>(decisions.cols()));
  for (Eigen::Index i = 0; i < decisions.rows(); ++i) {
    for (Eigen::Index c = 0; c < decisions.cols(); ++c) row[static_cast<std::size_t>(c)] = decisions(i, c);
    for (int c : top_m(row, k)) {
      if (c == truth[static_cast<std::size_t>(i)]) {
        ++hits;
        break;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

std::vector<int> argmax_rows(const Eigen::MatrixXd& decisions) {
  std::vector<int> out(static_cast<std::size_t>(decisions.rows()));
  std::vector<double> row(static_cast<std::size_t>(decisions.cols()));
  for (Eigen::Index i = 0; i < decisions.rows(); ++i) {
    for (Eigen::Index c = 0; c < decisions.cols(); ++c) row[static_cast<std::size_t>(c)] = decisions(i, c);
    out[static_cast<std::size_t>(i)] = top_m(row, 1)[0];
  }
  return out;
}

Eigen::MatrixXd confusion_matrix(std::span<const int> truth, std::span<const int> predicted, int classes) {
  if (truth.size() != predicted.size()) throw Error(Errc::dimension_mismatch, "confusion_matrix: length mismatch");
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(classes, classes);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || truth[i] >= classes || predicted[i] < 0 || predicted[i] >= classes) {
      throw Error(Errc::invalid_label, "confusion_matrix: class out of range", i);
    }
    m(truth[i], predicted[i]) += 1.0;
  }
  for (int r = 0; r < classes; ++r) {
    const double total = m.row(r).sum();
    if (total > 0) m.row(r) /= total;
  }
  return m;
}

void write_report_csv(const EvaluationReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto& labels = report.class_labels;

  auto cm = open_csv(dir / "confusion_matrix.csv");
  cm << "true\\predicted";
  for (int l : labels) cm << ',' << l;
  cm << '\n';
  for (Eigen::Index r = 0; r < report.confusion.rows(); ++r) {
    cm << labels[static_cast<std::size_t>(r)];
    for (Eigen::Index c = 0; c < report.confusion.cols(); ++c) cm << ',' << report.confusion(r, c);
    cm << '\n';
  }

  auto acc = open_csv(dir / "accuracy.csv");
  acc << "model,top1,top2\n";
  for (const auto& row : report.accuracy) acc << row.name << ',' << row.top1 << ',' << row.top2 << '\n';

  auto curve = open_csv(dir / "resolved_curve.csv");
  curve << "resolved_sets,accuracy\n";
  for (const auto& p : report.curve) curve << p.resolved_sets << ',' << p.accuracy << '\n';

  auto pairs = open_csv(dir / "pair_accuracy.csv");
  pairs << "rank,class_a,class_b,members,resolved,stage1_accuracy,final_accuracy\n";
  for (std::size_t r = 0; r < report.pairs.size(); ++r) {
    const auto& p = report.pairs[r];
    pairs << r << ',' << p.a << ',' << p.b << ',' << p.members << ',' << (p.resolved ? 1 : 0) << ','
          << p.stage1_accuracy << ',' << p.final_accuracy << '\n';
  }
}

}  // namespace epxhop
