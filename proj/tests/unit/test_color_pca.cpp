#include <gtest/gtest.h>

#include <random>

#include "epxhop/color_pca.hpp"
#include "epxhop/error.hpp"
#include "synthetic.hpp"

namespace epxhop {
namespace {

std::vector<LabeledImage> random_set(std::size_t n, std::uint64_t seed) {
  std::vector<LabeledImage> out;
  for (std::size_t i = 0; i < n; ++i) {
    Image img = testing::random_image(seed + i);
    // correlate the channels so the spectrum is far from flat
    for (int r = 0; r < 32; ++r)
      for (int c = 0; c < 32; ++c) {
        const float base = img.at(r, c, 0);
        img.at(r, c, 1) = 0.6f * base + 0.4f * img.at(r, c, 1);
        img.at(r, c, 2) = 0.8f * base + 0.2f * img.at(r, c, 2);
      }
    out.push_back({img, 0, static_cast<std::uint32_t>(i)});
  }
  return out;
}

TEST(ColorPca, GrayscaleIsRankOne) {
  std::vector<LabeledImage> images;
  for (int i = 0; i < 3; ++i) {
    Image img = testing::random_image(100 + i);
    for (int r = 0; r < 32; ++r)
      for (int c = 0; c < 32; ++c) img.at(r, c, 1) = img.at(r, c, 2) = img.at(r, c, 0);
    images.push_back({img, 0, static_cast<std::uint32_t>(i)});
  }
  const ColorPCA pca = fit_color_pca(images);
  const double s = 1.0 / std::sqrt(3.0);
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(pca.basis(0, k), s, 1e-6);
  EXPECT_NEAR(pca.energy_fractions[0], 1.0, 1e-9);
  EXPECT_NEAR(pca.energy_fractions[1], 0.0, 1e-9);
  EXPECT_NEAR(pca.energy_fractions[2], 0.0, 1e-9);

  const Image white(32, 32, 3, 1.0f);
  const auto [p, q] = project_pq(white, pca);
  const double mean_gray = pca.mean.mean();
  for (float v : p.data) EXPECT_NEAR(v, std::sqrt(3.0) * (1.0 - mean_gray), 1e-5);
}

TEST(ColorPca, TypeInvariants) {
  const ColorPCA pca = fit_color_pca(random_set(6, 1));
  EXPECT_LT((pca.basis * pca.basis.transpose() - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_NEAR(pca.energy_fractions.sum(), 1.0, 1e-9);
  EXPECT_GE(pca.energy_fractions[0], pca.energy_fractions[1]);
  EXPECT_GE(pca.energy_fractions[1], pca.energy_fractions[2]);
  EXPECT_GE(pca.energy_fractions[2], 0.0);
  for (int r = 0; r < 3; ++r) {
    Eigen::Index arg = 0;
    pca.basis.row(r).cwiseAbs().maxCoeff(&arg);
    EXPECT_GT(pca.basis(r, arg), 0.0);
  }
  EXPECT_NO_THROW(validate(pca));
}

TEST(ColorPca, ReconstructionByInverse) {
  const auto images = random_set(10, 20);
  const ColorPCA pca = fit_color_pca(images);
  const Eigen::Matrix3d inverse = pca.basis.inverse();
  for (const auto& li : images)
    for (int r = 0; r < 32; r += 3)
      for (int c = 0; c < 32; c += 3) {
        const Eigen::Vector3d rgb(li.image.at(r, c, 0), li.image.at(r, c, 1), li.image.at(r, c, 2));
        const Eigen::Vector3d back = inverse * project_pixel(rgb, pca) + pca.mean;
        EXPECT_LT((back - rgb).cwiseAbs().maxCoeff(), 1e-6);
      }
}

TEST(ColorPca, OrderingAndDecorrelation) {
  const auto images = random_set(8, 40);
  const ColorPCA pca = fit_color_pca(images);
  double sp = 0, sq = 0, spp = 0, sqq = 0, spq = 0;
  std::size_t n = 0;
  for (const auto& li : images) {
    const auto [p, q] = project_pq(li.image, pca);
    for (std::size_t i = 0; i < p.data.size(); ++i) {
      const double a = p.data[i], b = q.data[i];
      sp += a, sq += b, spp += a * a, sqq += b * b, spq += a * b;
      ++n;
    }
  }
  const double mp = sp / n, mq = sq / n;
  const double var_p = spp / n - mp * mp, var_q = sqq / n - mq * mq;
  EXPECT_GE(var_p, var_q);
  EXPECT_NEAR(spq / n - mp * mq, 0.0, 1e-6);
  EXPECT_NEAR(var_p, pca.eigenvalues[0], 1e-5);
  EXPECT_NEAR(var_q, pca.eigenvalues[1], 1e-5);
}

TEST(ColorPca, MeanPixelProjectsToZero) {
  const ColorPCA pca = fit_color_pca(random_set(3, 60));
  Image img(32, 32, 3);
  for (int r = 0; r < 32; ++r)
    for (int c = 0; c < 32; ++c)
      for (int k = 0; k < 3; ++k) img.at(r, c, k) = static_cast<float>(pca.mean[k]);
  const auto [p, q] = project_pq(img, pca);
  EXPECT_EQ(p.size, 32);
  EXPECT_EQ(p.channels, 1);
  for (std::size_t i = 0; i < p.data.size(); ++i) {
    EXPECT_NEAR(p.data[i], 0.0, 1e-6);
    EXPECT_NEAR(q.data[i], 0.0, 1e-6);
  }
}

TEST(ColorPca, Errors) {
  const std::vector<LabeledImage> flat{{Image(32, 32, 3, 0.5f), 0, 0}, {Image(32, 32, 3, 0.5f), 1, 1}};
  try {
    fit_color_pca(flat);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::degenerate_input);
  }
  EXPECT_THROW(fit_color_pca(std::span(flat).first(1)), Error);
}

}  // namespace
}  // namespace epxhop
