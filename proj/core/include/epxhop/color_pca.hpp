#pragma once

#include <span>
#include <utility>

#include <Eigen/Dense>

#include "epxhop/feature_map.hpp"
#include "epxhop/image.hpp"

namespace epxhop {

// 3x3 PCA of pooled RGB pixel vectors. basis rows are principal directions
// sorted by descending eigenvalue; each row's largest-magnitude entry is
// positive.
struct ColorPCA {
  Eigen::Matrix3d basis = Eigen::Matrix3d::Identity();
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  Eigen::Vector3d eigenvalues = Eigen::Vector3d::Zero();
  Eigen::Vector3d energy_fractions = Eigen::Vector3d::Zero();
};

// Two-pass (mean, then centred covariance) accumulation in double precision
// over every pixel of every image. Throws Errc::degenerate_input when the
// pooled covariance vanishes.
ColorPCA fit_color_pca(std::span<const LabeledImage> images);

// Single-channel maps holding an image's first (P) and second (Q) principal
// coordinates; the third coordinate is dropped.
std::pair<FeatureMap, FeatureMap> project_pq(const Image& img, const ColorPCA& pca);

// All three coordinates per pixel, for reconstruction checks.
Eigen::Vector3d project_pixel(const Eigen::Vector3d& rgb, const ColorPCA& pca);

void validate(const ColorPCA& pca);

}  // namespace epxhop
