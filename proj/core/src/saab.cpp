#include "epxhop/saab.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "epxhop/error.hpp"

namespace epxhop {
namespace {

// Largest-magnitude component positive; first index wins ties.
void fix_sign(Eigen::Ref<Eigen::VectorXd> v) {
  Eigen::Index arg = 0;
  double best = -1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v[i]) > best) {
      best = std::abs(v[i]);
      arg = i;
    }
  }
  if (v[arg] < 0) v = -v;
}

}  // namespace

Eigen::MatrixXd extract_neighborhoods(const FeatureMap& map, int channel, const Window& window) {
  if (channel < 0 || channel >= map.channels) {
    throw Error(Errc::dimension_mismatch, "neighborhood channel out of range");
  }
  const int padded = map.size + 2 * window.padding;
  if (window.height <= 0 || window.width <= 0 || padded < window.height || padded < window.width ||
      window.stride_h <= 0 || window.stride_w <= 0) {
    throw Error(Errc::invalid_argument,
                "window " + std::to_string(window.height) + "x" + std::to_string(window.width) +
                    " larger than padded map of size " + std::to_string(padded));
  }
  const int out_rows = (padded - window.height) / window.stride_h + 1;
  const int out_cols = (padded - window.width) / window.stride_w + 1;
  Eigen::MatrixXd patches(static_cast<Eigen::Index>(out_rows) * out_cols, window.area());
  for (int orow = 0; orow < out_rows; ++orow) {
    for (int ocol = 0; ocol < out_cols; ++ocol) {
      const Eigen::Index row = static_cast<Eigen::Index>(orow) * out_cols + ocol;
      const int r0 = orow * window.stride_h - window.padding;
      const int c0 = ocol * window.stride_w - window.padding;
      int k = 0;
      for (int dr = 0; dr < window.height; ++dr) {
        const int r = r0 + dr;
        for (int dc = 0; dc < window.width; ++dc, ++k) {
          const int c = c0 + dc;
          const bool inside = r >= 0 && r < map.size && c >= 0 && c < map.size;
          patches(row, k) = inside ? map.at(r, c, channel) : 0.0;
        }
      }
    }
  }
  return patches;
}

Eigen::MatrixXd helmert_basis(int n) {
  Eigen::MatrixXd basis = Eigen::MatrixXd::Zero(n, std::max(0, n - 1));
  for (int j = 0; j + 1 < n; ++j) {
    const double denom = std::sqrt(static_cast<double>(j + 1) * (j + 2));
    for (int i = 0; i <= j; ++i) basis(i, j) = 1.0 / denom;
    basis(j + 1, j) = -static_cast<double>(j + 1) / denom;
  }
  return basis;
}

PatchMoments patch_moments(const Eigen::MatrixXd& patches) {
  PatchMoments m;
  m.count = static_cast<std::size_t>(patches.rows());
  if (patches.rows() == 0) {
    m.mean = Eigen::VectorXd::Zero(patches.cols());
    m.covariance = Eigen::MatrixXd::Zero(patches.cols(), patches.cols());
    return m;
  }
  m.mean = patches.colwise().mean().transpose();
  const Eigen::MatrixXd centred = patches.rowwise() - m.mean.transpose();
  m.covariance = (centred.transpose() * centred) / static_cast<double>(patches.rows());
  m.max_norm = patches.rowwise().norm().maxCoeff();
  return m;
}

SaabNode fit_saab(const PatchMoments& moments, int max_kernels) {
  const int n = static_cast<int>(moments.mean.size());
  if (n < 1 || moments.covariance.rows() != n || moments.covariance.cols() != n) {
    throw Error(Errc::dimension_mismatch, "patch moments have inconsistent dimensions");
  }
  if (moments.count < static_cast<std::size_t>(n)) {
    throw Error(Errc::insufficient_samples,
                "Saab fit needs at least " + std::to_string(n) + " patches, got " +
                    std::to_string(moments.count));
  }
  const int k = std::clamp(max_kernels, 0, n - 1);

  SaabNode node;
  node.dc_kernel = Eigen::VectorXd::Constant(n, 1.0 / std::sqrt(static_cast<double>(n)));

  const Eigen::MatrixXd& cov = moments.covariance;
  const double dc_variance = std::max(0.0, node.dc_kernel.dot(cov * node.dc_kernel));

  Eigen::VectorXd ac_values = Eigen::VectorXd::Zero(std::max(0, n - 1));
  Eigen::MatrixXd ac_vectors(n, std::max(0, n - 1));
  if (n > 1) {
    const Eigen::MatrixXd basis = helmert_basis(n);
    Eigen::MatrixXd reduced = basis.transpose() * cov * basis;
    reduced = 0.5 * (reduced + reduced.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(reduced);
    if (solver.info() != Eigen::Success) {
      throw Error(Errc::internal, "eigendecomposition of residual covariance failed");
    }
    for (int j = 0; j < n - 1; ++j) {
      const int src = n - 2 - j;  // ascending -> descending
      ac_values[j] = std::max(0.0, solver.eigenvalues()[src]);
      ac_vectors.col(j) = basis * solver.eigenvectors().col(src);
    }
  }

  node.ac_kernels.resize(k, n);
  node.eigenvalues.resize(k);
  for (int j = 0; j < k; ++j) {
    Eigen::VectorXd v = ac_vectors.col(j);
    v.normalize();
    fix_sign(v);
    node.ac_kernels.row(j) = v.transpose();
    node.eigenvalues[j] = ac_values[j];
  }

  const double total = dc_variance + ac_values.sum();
  node.energy_shares.assign(static_cast<std::size_t>(k) + 1, 0.0);
  if (total > std::numeric_limits<double>::min()) {
    node.energy_shares[0] = dc_variance / total;
    for (int j = 0; j < k; ++j) node.energy_shares[static_cast<std::size_t>(j) + 1] = ac_values[j] / total;
  } else {
    node.energy_shares[0] = 1.0;
  }
  node.child_energies = node.energy_shares;
  node.child_roles.assign(node.energy_shares.size(), ChannelRole::leaf);
  return node;
}

SaabNode fit_saab(const Eigen::MatrixXd& patches, int max_kernels) {
  if (patches.rows() < patches.cols()) {
    throw Error(Errc::insufficient_samples,
                "Saab fit needs M >= N patches (M=" + std::to_string(patches.rows()) +
                    ", N=" + std::to_string(patches.cols()) + ")");
  }
  return fit_saab(patch_moments(patches), max_kernels);
}

Eigen::MatrixXd apply_saab(const Eigen::MatrixXd& patches, const SaabNode& node) {
  const int n = node.patch_size();
  if (patches.cols() != n) {
    throw Error(Errc::dimension_mismatch,
                "patch length " + std::to_string(patches.cols()) + " does not match kernel size " +
                    std::to_string(n));
  }
  Eigen::MatrixXd kernels(node.kernel_count(), n);
  kernels.row(0) = node.dc_kernel.transpose();
  if (node.ac_kernels.rows() > 0) kernels.bottomRows(node.ac_kernels.rows()) = node.ac_kernels;
  Eigen::MatrixXd out = patches * kernels.transpose();
  if (node.bias != 0.0 && out.cols() > 1) out.rightCols(out.cols() - 1).array() += node.bias;
  return out;
}

FeatureMap max_pool(const FeatureMap& map, int window, int stride) {
  if (map.size < window || window <= 0 || stride <= 0) {
    throw Error(Errc::invalid_argument,
                "max_pool needs a map of at least " + std::to_string(window) + "x" +
                    std::to_string(window));
  }
  const int out = pooled_size(map.size, window, stride);
  FeatureMap pooled(out, map.channels);
  for (int r = 0; r < out; ++r)
    for (int c = 0; c < out; ++c)
      for (int k = 0; k < map.channels; ++k) {
        float best = -std::numeric_limits<float>::infinity();
        for (int dr = 0; dr < window; ++dr)
          for (int dc = 0; dc < window; ++dc)
            best = std::max(best, map.at(r * stride + dr, c * stride + dc, k));
        pooled.at(r, c, k) = best;
      }
  return pooled;
}

}  // namespace epxhop
