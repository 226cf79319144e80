#include "epxhop/color_pca.hpp"

#include <cmath>
#include <vector>

#include "epxhop/error.hpp"
#include "epxhop/parallel.hpp"

namespace epxhop {
namespace {

constexpr std::size_t kImagesPerChunk = 256;

void require_rgb(const Image& img) {
  if (img.channels != 3) throw Error(Errc::invalid_argument, "color PCA expects RGB images");
}

}  // namespace

ColorPCA fit_color_pca(std::span<const LabeledImage> images) {
  if (images.size() < 2) {
    throw Error(Errc::insufficient_samples, "color PCA needs at least 2 images");
  }
  for (const auto& li : images) require_rgb(li.image);

  const std::size_t n = images.size();
  const std::size_t chunks = chunk_count(n, kImagesPerChunk);

  // Pass 1: mean.
  std::vector<Eigen::Vector3d> sums(chunks, Eigen::Vector3d::Zero());
  std::vector<double> counts(chunks, 0.0);
  parallel_chunks(n, kImagesPerChunk, [&](std::size_t c, std::size_t b, std::size_t e) {
    Eigen::Vector3d s = Eigen::Vector3d::Zero();
    double cnt = 0.0;
    for (std::size_t i = b; i < e; ++i) {
      const auto& px = images[i].image.pixels;
      for (std::size_t p = 0; p < px.size(); p += 3) {
        s += Eigen::Vector3d(px[p], px[p + 1], px[p + 2]);
      }
      cnt += static_cast<double>(px.size() / 3);
    }
    sums[c] = s;
    counts[c] = cnt;
  });
  Eigen::Vector3d total = Eigen::Vector3d::Zero();
  double count = 0.0;
  for (std::size_t c = 0; c < chunks; ++c) {
    total += sums[c];
    count += counts[c];
  }
  const Eigen::Vector3d mean = total / count;

  // Pass 2: centred covariance.
  std::vector<Eigen::Matrix3d> partial(chunks, Eigen::Matrix3d::Zero());
  parallel_chunks(n, kImagesPerChunk, [&](std::size_t c, std::size_t b, std::size_t e) {
    Eigen::Matrix3d acc = Eigen::Matrix3d::Zero();
    for (std::size_t i = b; i < e; ++i) {
      const auto& px = images[i].image.pixels;
      for (std::size_t p = 0; p < px.size(); p += 3) {
        const Eigen::Vector3d d = Eigen::Vector3d(px[p], px[p + 1], px[p + 2]) - mean;
        acc.noalias() += d * d.transpose();
      }
    }
    partial[c] = acc;
  });
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : partial) cov += p;
  cov /= count;

  if (cov.trace() <= 1e-15) {
    throw Error(Errc::degenerate_input, "all pixels are identical; color covariance is zero");
  }

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
  ColorPCA pca;
  pca.mean = mean;
  for (int k = 0; k < 3; ++k) {
    // Eigen returns ascending eigenvalues.
    const int src = 2 - k;
    Eigen::Vector3d v = solver.eigenvectors().col(src);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v[arg] < 0) v = -v;
    pca.basis.row(k) = v.transpose();
    pca.eigenvalues[k] = std::max(0.0, solver.eigenvalues()[src]);
  }
  pca.energy_fractions = pca.eigenvalues / pca.eigenvalues.sum();
  return pca;
}

Eigen::Vector3d project_pixel(const Eigen::Vector3d& rgb, const ColorPCA& pca) {
  return pca.basis * (rgb - pca.mean);
}

std::pair<FeatureMap, FeatureMap> project_pq(const Image& img, const ColorPCA& pca) {
  require_rgb(img);
  if (img.height != img.width) throw Error(Errc::invalid_argument, "project_pq expects square images");
  FeatureMap p(img.height, 1);
  FeatureMap q(img.height, 1);
  const Eigen::RowVector3d b0 = pca.basis.row(0);
  const Eigen::RowVector3d b1 = pca.basis.row(1);
  for (int r = 0; r < img.height; ++r)
    for (int c = 0; c < img.width; ++c) {
      const Eigen::Vector3d d =
          Eigen::Vector3d(img.at(r, c, 0), img.at(r, c, 1), img.at(r, c, 2)) - pca.mean;
      p.at(r, c, 0) = static_cast<float>(b0.dot(d));
      q.at(r, c, 0) = static_cast<float>(b1.dot(d));
    }
  return {std::move(p), std::move(q)};
}

void validate(const ColorPCA& pca) {
  const double ortho = (pca.basis * pca.basis.transpose() - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  const auto& e = pca.energy_fractions;
  const bool ordered = e[0] >= e[1] && e[1] >= e[2] && e.minCoeff() >= 0.0;
  if (ortho > 1e-6 || !ordered || std::abs(e.sum() - 1.0) > 1e-9) {
    throw Error(Errc::corrupt_model, "color PCA violates orthonormality or energy ordering");
  }
}

}  // namespace epxhop
