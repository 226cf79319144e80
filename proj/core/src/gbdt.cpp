#include "epxhop/gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "epxhop/dataset.hpp"
#include "epxhop/error.hpp"
#include "epxhop/parallel.hpp"

namespace epxhop {
namespace {

constexpr std::size_t kSketchRows = 100000;
constexpr std::size_t kRowsPerChunk = 4096;
constexpr double kMinHessian = 1e-16;
constexpr double kMinGain = 1e-12;

// Feature-major bin indices plus the cut values that produced them.
struct Quantized {
  std::size_t rows = 0;
  std::vector<std::vector<float>> cuts;  // per feature, strictly increasing
  std::vector<std::uint8_t> bins;        // feature-major: bins[f * rows + i]

  int bin_count(std::size_t f) const { return static_cast<int>(cuts[f].size()) + 1; }
  const std::uint8_t* column(std::size_t f) const { return bins.data() + f * rows; }
};

Quantized quantize(const FeatureMatrix& x, int max_bins) {
  Quantized q;
  q.rows = static_cast<std::size_t>(x.rows());
  const auto features = static_cast<std::size_t>(x.cols());
  q.cuts.resize(features);
  q.bins.resize(features * q.rows);

  // Evenly strided sketch rows; independent of thread count.
  const std::size_t sketch = std::min(q.rows, kSketchRows);
  std::vector<std::size_t> sample(sketch);
  for (std::size_t j = 0; j < sketch; ++j) sample[j] = j * q.rows / sketch;

  parallel_for(features, [&](std::size_t f) {
    std::vector<float> values(sketch);
    for (std::size_t j = 0; j < sketch; ++j) values[j] = x(static_cast<Eigen::Index>(sample[j]), static_cast<Eigen::Index>(f));
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    auto& cuts = q.cuts[f];
    if (values.size() <= static_cast<std::size_t>(max_bins)) {
      if (!values.empty()) cuts.assign(values.begin(), values.end() - 1);
    } else {
      for (int b = 1; b < max_bins; ++b) {
        const float v = values[static_cast<std::size_t>(b) * values.size() / static_cast<std::size_t>(max_bins)];
        if (cuts.empty() || v > cuts.back()) cuts.push_back(v);
      }
    }
    std::uint8_t* col = q.bins.data() + f * q.rows;
    for (std::size_t i = 0; i < q.rows; ++i) {
      const float v = x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(f));
      col[i] = static_cast<std::uint8_t>(std::lower_bound(cuts.begin(), cuts.end(), v) - cuts.begin());
    }
  });
  return q;
}

struct BinStat {
  double g = 0.0;
  double h = 0.0;
  std::uint32_t n = 0;
};

struct Split {
  double gain = 0.0;
  int feature = -1;
  int bin = -1;
};

struct Pending {
  std::size_t begin;
  std::size_t end;
  std::int32_t node;
  std::vector<BinStat> hist;  // features * 256
  double g;
  double h;
};

constexpr std::size_t kBinStride = 256;

class TreeBuilder {
 public:
  TreeBuilder(const Quantized& q, const BoostParams& params, std::span<const double> g,
              std::span<const double> h)
      : q_(q), params_(params), g_(g), h_(h) {}

  // rows is reordered in place. Returns the tree and the split bins of its
  // internal nodes (for routing training rows).
  RegressionTree build(std::vector<std::uint32_t>& rows, std::span<const std::uint32_t> features,
                       std::vector<int>& split_bins) {
    RegressionTree tree;
    split_bins.clear();
    features_ = features;

    Pending root{0, rows.size(), 0, histogram(rows, 0, rows.size()), 0.0, 0.0};
    for (std::size_t i = 0; i < rows.size(); ++i) {
      root.g += g_[rows[i]];
      root.h += h_[rows[i]];
    }
    tree.nodes.emplace_back();
    split_bins.push_back(-1);

    std::vector<Pending> level;
    level.push_back(std::move(root));
    for (int depth = 0; !level.empty(); ++depth) {
      std::vector<Pending> next;
      for (auto& node : level) {
        const std::size_t count = node.end - node.begin;
        Split best;
        if (depth < params_.max_depth && count >= 2 * static_cast<std::size_t>(params_.min_leaf_samples)) {
          best = find_split(node);
        }
        if (best.feature < 0) {
          tree.nodes[static_cast<std::size_t>(node.node)].value = leaf_value(node.g, node.h);
          continue;
        }

        const std::uint8_t* col = q_.column(static_cast<std::size_t>(best.feature));
        const auto first = rows.begin() + static_cast<std::ptrdiff_t>(node.begin);
        const auto last = rows.begin() + static_cast<std::ptrdiff_t>(node.end);
        const auto mid = std::stable_partition(first, last, [&](std::uint32_t r) { return col[r] <= best.bin; });
        const std::size_t split_at = static_cast<std::size_t>(mid - rows.begin());

        const auto left_id = static_cast<std::int32_t>(tree.nodes.size());
        tree.nodes.emplace_back();
        tree.nodes.emplace_back();
        split_bins.push_back(-1);
        split_bins.push_back(-1);
        TreeNode& parent = tree.nodes[static_cast<std::size_t>(node.node)];
        parent.feature = best.feature;
        parent.threshold = q_.cuts[static_cast<std::size_t>(best.feature)][static_cast<std::size_t>(best.bin)];
        parent.left = left_id;
        parent.right = left_id + 1;
        split_bins[static_cast<std::size_t>(node.node)] = best.bin;

        Pending left{node.begin, split_at, left_id, {}, 0.0, 0.0};
        Pending right{split_at, node.end, left_id + 1, {}, 0.0, 0.0};
        for (std::size_t i = left.begin; i < left.end; ++i) {
          left.g += g_[rows[i]];
          left.h += h_[rows[i]];
        }
        right.g = node.g - left.g;
        right.h = node.h - left.h;

        if (depth + 1 < params_.max_depth) {
          // Scan the smaller child; derive the sibling by subtraction.
          Pending& small = (left.end - left.begin) <= (right.end - right.begin) ? left : right;
          Pending& large = &small == &left ? right : left;
          small.hist = histogram(rows, small.begin, small.end);
          large.hist = std::move(node.hist);
          for (std::size_t k = 0; k < large.hist.size(); ++k) {
            large.hist[k].g -= small.hist[k].g;
            large.hist[k].h -= small.hist[k].h;
            large.hist[k].n -= small.hist[k].n;
          }
        }
        next.push_back(std::move(left));
        next.push_back(std::move(right));
      }
      level = std::move(next);
    }
    return tree;
  }

 private:
  double leaf_value(double g, double h) const {
    return -g / (h + params_.lambda) * params_.learning_rate;
  }

  std::vector<BinStat> histogram(const std::vector<std::uint32_t>& rows, std::size_t begin,
                                 std::size_t end) const {
    const std::size_t features = q_.cuts.size();
    std::vector<BinStat> hist(features * kBinStride);
    parallel_for(features_.size(), [&](std::size_t k) {
      const std::size_t f = features_[k];
      const std::uint8_t* col = q_.column(f);
      BinStat* out = hist.data() + f * kBinStride;
      for (std::size_t i = begin; i < end; ++i) {
        const std::uint32_t r = rows[i];
        BinStat& s = out[col[r]];
        s.g += g_[r];
        s.h += h_[r];
        ++s.n;
      }
    });
    return hist;
  }

  Split find_split(const Pending& node) const {
    std::vector<Split> per_feature(features_.size());
    const double parent = node.g * node.g / (node.h + params_.lambda);
    const auto total = static_cast<std::uint32_t>(node.end - node.begin);
    const auto min_leaf = static_cast<std::uint32_t>(std::max(1, params_.min_leaf_samples));
    parallel_for(features_.size(), [&](std::size_t k) {
      const std::size_t f = features_[k];
      const BinStat* hist = node.hist.data() + f * kBinStride;
      const int bins = q_.bin_count(f);
      double gl = 0.0, hl = 0.0;
      std::uint32_t nl = 0;
      Split best;
      for (int b = 0; b + 1 < bins; ++b) {
        gl += hist[b].g;
        hl += hist[b].h;
        nl += hist[b].n;
        const std::uint32_t nr = total - nl;
        if (nl < min_leaf) continue;
        if (nr < min_leaf) break;
        const double gr = node.g - gl;
        const double hr = node.h - hl;
        const double gain = gl * gl / (hl + params_.lambda) + gr * gr / (hr + params_.lambda) - parent;
        if (gain > best.gain) best = {gain, static_cast<int>(f), b};
      }
      per_feature[k] = best;
    });
    Split best;
    for (const auto& s : per_feature) {
      if (s.feature >= 0 && s.gain > kMinGain && s.gain > best.gain) best = s;
    }
    return best;
  }

  const Quantized& q_;
  const BoostParams& params_;
  std::span<const double> g_;
  std::span<const double> h_;
  std::span<const std::uint32_t> features_;
};

void softmax_inplace(std::span<double> scores) {
  const double mx = *std::max_element(scores.begin(), scores.end());
  double sum = 0.0;
  for (auto& s : scores) {
    s = std::exp(s - mx);
    sum += s;
  }
  for (auto& s : scores) s /= sum;
}

double route_binned(const RegressionTree& tree, const std::vector<int>& split_bins, const Quantized& q,
                    std::uint32_t row) {
  std::size_t n = 0;
  while (tree.nodes[n].feature >= 0) {
    const auto& node = tree.nodes[n];
    const std::uint8_t b = q.column(static_cast<std::size_t>(node.feature))[row];
    n = static_cast<std::size_t>(b <= split_bins[n] ? node.left : node.right);
  }
  return tree.nodes[n].value;
}

}  // namespace

double RegressionTree::predict(const float* row) const {
  std::size_t n = 0;
  while (nodes[n].feature >= 0) {
    const auto& node = nodes[n];
    n = static_cast<std::size_t>(row[node.feature] <= node.threshold ? node.left : node.right);
  }
  return nodes[n].value;
}

int RegressionTree::depth() const {
  std::vector<std::pair<std::size_t, int>> stack{{0, 0}};
  int deepest = 0;
  while (!stack.empty()) {
    auto [n, d] = stack.back();
    stack.pop_back();
    deepest = std::max(deepest, d);
    if (nodes[n].feature >= 0) {
      stack.push_back({static_cast<std::size_t>(nodes[n].left), d + 1});
      stack.push_back({static_cast<std::size_t>(nodes[n].right), d + 1});
    }
  }
  return deepest;
}

int RegressionTree::leaf_count() const {
  return static_cast<int>(std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.feature < 0; }));
}

void BoostedModel::predict_proba_row(const float* row, std::span<double> out, int max_rounds) const {
  const int rounds_used = max_rounds < 0 ? rounds() : std::min(max_rounds, rounds());
  std::fill(out.begin(), out.end(), 0.0);
  for (int r = 0; r < rounds_used; ++r)
    for (int c = 0; c < class_count_; ++c)
      out[static_cast<std::size_t>(c)] += trees_[static_cast<std::size_t>(r) * class_count_ + c].predict(row);
  softmax_inplace(out);
}

Eigen::MatrixXd BoostedModel::predict_proba(const FeatureMatrix& rows, int max_rounds) const {
  if (rows.cols() != feature_count_) {
    throw Error(Errc::dimension_mismatch,
                "classifier expects " + std::to_string(feature_count_) + " features, got " +
                    std::to_string(rows.cols()));
  }
  Eigen::MatrixXd out(rows.rows(), class_count_);
  const auto n = static_cast<std::size_t>(rows.rows());
  parallel_chunks(n, kRowsPerChunk, [&](std::size_t, std::size_t b, std::size_t e) {
    std::vector<double> p(static_cast<std::size_t>(class_count_));
    for (std::size_t i = b; i < e; ++i) {
      predict_proba_row(rows.row(static_cast<Eigen::Index>(i)).data(), p, max_rounds);
      for (int c = 0; c < class_count_; ++c) out(static_cast<Eigen::Index>(i), c) = p[static_cast<std::size_t>(c)];
    }
  });
  return out;
}

BoostedModel fit_boosted(const FeatureMatrix& rows, std::span<const int> targets, int class_count,
                         const BoostParams& params, std::span<const double> sample_weights,
                         FitReport* report) {
  const auto m = static_cast<std::size_t>(rows.rows());
  if (class_count < 2) throw Error(Errc::missing_class, "classifier needs at least two classes");
  if (targets.size() != m) throw Error(Errc::dimension_mismatch, "target count differs from row count");
  if (!sample_weights.empty() && sample_weights.size() != m) {
    throw Error(Errc::dimension_mismatch, "sample weight count differs from row count");
  }
  if (params.rounds < 0 || params.max_depth < 0 || params.learning_rate <= 0.0 || params.subsample <= 0.0 ||
      params.subsample > 1.0 || params.colsample <= 0.0 || params.colsample > 1.0 || params.max_bins < 2 ||
      params.max_bins > 256 || params.lambda < 0.0) {
    throw Error(Errc::invalid_config, "invalid boosting parameters");
  }
  if (!rows.allFinite()) throw Error(Errc::invalid_argument, "training features contain NaN or Inf");

  std::vector<std::vector<std::uint32_t>> by_class(static_cast<std::size_t>(class_count));
  for (std::size_t i = 0; i < m; ++i) {
    const int t = targets[i];
    if (t < 0 || t >= class_count) throw Error(Errc::invalid_label, "target outside [0, C)", i);
    by_class[static_cast<std::size_t>(t)].push_back(static_cast<std::uint32_t>(i));
  }
  for (int c = 0; c < class_count; ++c) {
    if (by_class[static_cast<std::size_t>(c)].empty()) {
      throw Error(Errc::missing_class, "class " + std::to_string(c) + " has no training sample");
    }
  }

  BoostedModel model(class_count, static_cast<int>(rows.cols()), params);
  const Quantized q = quantize(rows, params.max_bins);
  const auto features = static_cast<std::size_t>(rows.cols());
  const auto cc = static_cast<std::size_t>(class_count);

  std::vector<double> scores(m * cc, 0.0);
  std::vector<double> prob(m * cc);
  std::vector<double> g(m), h(m);
  std::vector<int> split_bins;
  std::vector<std::uint32_t> all_features(features);
  std::iota(all_features.begin(), all_features.end(), 0u);

  auto weight = [&](std::size_t i) { return sample_weights.empty() ? 1.0 : sample_weights[i]; };
  auto update_prob = [&] {
    parallel_chunks(m, kRowsPerChunk, [&](std::size_t, std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) {
        std::copy_n(scores.begin() + static_cast<std::ptrdiff_t>(i * cc), cc, prob.begin() + static_cast<std::ptrdiff_t>(i * cc));
        softmax_inplace(std::span<double>(prob.data() + i * cc, cc));
      }
    });
  };
  auto record_loss = [&] {
    if (!report) return;
    double loss = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      loss -= std::log(std::max(prob[i * cc + static_cast<std::size_t>(targets[i])], 1e-300));
    }
    report->train_loss.push_back(loss / static_cast<double>(m));
  };

  update_prob();
  TreeBuilder builder(q, params, g, h);
  for (int round = 0; round < params.rounds; ++round) {
    std::mt19937_64 rng(mix64(params.seed ^ mix64(static_cast<std::uint64_t>(round) + 1)));

    std::vector<std::uint32_t> sampled;
    for (const auto& members : by_class) {
      if (params.subsample >= 1.0) {
        sampled.insert(sampled.end(), members.begin(), members.end());
        continue;
      }
      std::vector<std::uint32_t> pool = members;
      const auto take = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(params.subsample * static_cast<double>(pool.size()))));
      for (std::size_t j = 0; j < take; ++j) {
        std::uniform_int_distribution<std::size_t> pick(j, pool.size() - 1);
        std::swap(pool[j], pool[pick(rng)]);
      }
      sampled.insert(sampled.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(take));
    }
    std::sort(sampled.begin(), sampled.end());

    for (std::size_t c = 0; c < cc; ++c) {
      for (std::size_t i = 0; i < m; ++i) {
        const double p = prob[i * cc + c];
        const double y = targets[i] == static_cast<int>(c) ? 1.0 : 0.0;
        g[i] = weight(i) * (p - y);
        h[i] = weight(i) * std::max(p * (1.0 - p), kMinHessian);
      }

      std::vector<std::uint32_t> feats = all_features;
      if (params.colsample < 1.0) {
        std::shuffle(feats.begin(), feats.end(), rng);
        const auto keep = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(params.colsample * static_cast<double>(features))));
        feats.resize(keep);
        std::sort(feats.begin(), feats.end());
      }

      std::vector<std::uint32_t> rows_for_tree = sampled;
      RegressionTree tree = builder.build(rows_for_tree, feats, split_bins);
      parallel_chunks(m, kRowsPerChunk, [&](std::size_t, std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
          scores[i * cc + c] += route_binned(tree, split_bins, q, static_cast<std::uint32_t>(i));
        }
      });
      model.mutable_trees().push_back(std::move(tree));
    }
    update_prob();
    record_loss();
  }
  return model;
}

double log_loss(const BoostedModel& model, const FeatureMatrix& rows, std::span<const int> targets,
                int max_rounds) {
  const Eigen::MatrixXd p = model.predict_proba(rows, max_rounds);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    loss -= std::log(std::max(p(i, targets[static_cast<std::size_t>(i)]), 1e-300));
  }
  return p.rows() == 0 ? 0.0 : loss / static_cast<double>(p.rows());
}

void validate(const BoostedModel& model) {
  if (model.class_count() < 1 || model.trees().size() % static_cast<std::size_t>(model.class_count()) != 0) {
    throw Error(Errc::corrupt_model, "ensemble tree count is not a multiple of the class count");
  }
  for (const auto& tree : model.trees()) {
    if (tree.nodes.empty()) throw Error(Errc::corrupt_model, "empty regression tree");
    for (std::size_t n = 0; n < tree.nodes.size(); ++n) {
      const auto& node = tree.nodes[n];
      if (node.feature < 0) continue;
      const auto size = static_cast<std::int32_t>(tree.nodes.size());
      if (node.feature >= model.feature_count() || node.left <= static_cast<std::int32_t>(n) ||
          node.right <= static_cast<std::int32_t>(n) || node.left >= size || node.right >= size) {
        throw Error(Errc::corrupt_model, "regression tree has an invalid split");
      }
    }
    if (tree.depth() > model.params().max_depth) throw Error(Errc::corrupt_model, "tree deeper than max_depth");
  }
}

}  // namespace epxhop
