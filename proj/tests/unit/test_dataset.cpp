#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "epxhop/dataset.hpp"
#include "epxhop/error.hpp"
#include "epxhop/parallel.hpp"
#include "synthetic.hpp"

namespace epxhop {
namespace {

std::vector<std::uint8_t> random_batch(std::size_t records, std::uint64_t seed) {
  std::vector<std::uint8_t> bytes(records * kCifarRecordBytes);
  std::uint64_t state = seed;
  for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = static_cast<std::uint8_t>(mix64(state++) & 0xff);
  for (std::size_t r = 0; r < records; ++r) bytes[r * kCifarRecordBytes] = static_cast<std::uint8_t>(r % 10);
  return bytes;
}

TEST(CifarParse, RecordArithmetic) {
  const auto images = parse_cifar10_batch(random_batch(10, 1));
  ASSERT_EQ(images.size(), 10u);
  for (std::size_t i = 0; i < images.size(); ++i) {
    EXPECT_EQ(images[i].id, i);
    EXPECT_EQ(images[i].image.height, 32);
    EXPECT_EQ(images[i].image.width, 32);
    EXPECT_EQ(images[i].image.channels, 3);
  }
}

TEST(CifarParse, AllOnesRecord) {
  std::vector<std::uint8_t> rec(kCifarRecordBytes, 255);
  rec[0] = 7;
  const auto images = parse_cifar10_batch(rec);
  ASSERT_EQ(images.size(), 1u);
  EXPECT_EQ(images[0].label, 7);
  for (float v : images[0].image.pixels) EXPECT_EQ(v, 1.0f);
}

TEST(CifarParse, PlanarLayout) {
  std::vector<std::uint8_t> rec(kCifarRecordBytes, 0);
  rec[1 + 2 * 1024 + 5 * 32 + 9] = 51;  // B plane, row 5, col 9
  const auto images = parse_cifar10_batch(rec);
  EXPECT_FLOAT_EQ(images[0].image.at(5, 9, 2), 51.0f / 255.0f);
  EXPECT_EQ(images[0].image.at(5, 9, 0), 0.0f);
}

TEST(CifarParse, IncompleteRecordCarriesOffset) {
  const auto bytes = random_batch(2, 3);
  std::vector<std::uint8_t> extra(bytes.begin(), bytes.end());
  extra.push_back(0);
  try {
    parse_cifar10_batch(std::span<const std::uint8_t>(extra).first(3074));
    FAIL() << "expected malformed-file";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::malformed_file);
    EXPECT_EQ(e.detail(), 3073u);
  }
  EXPECT_THROW(parse_cifar10_batch(std::span<const std::uint8_t>{}), Error);
}

TEST(CifarParse, BadLabelCarriesRecordIndex) {
  auto bytes = random_batch(4, 5);
  bytes[2 * kCifarRecordBytes] = 10;
  try {
    parse_cifar10_batch(bytes);
    FAIL() << "expected invalid-label";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::invalid_label);
    EXPECT_EQ(e.detail(), 2u);
  }
}

TEST(CifarParse, RoundTripIsByteExact) {
  const auto bytes = random_batch(25, 11);
  const auto images = parse_cifar10_batch(bytes);
  EXPECT_EQ(serialize_cifar10_batch(images), bytes);
}

TEST(CifarParse, ThreadCountDoesNotChangeOutput) {
  const auto bytes = random_batch(40, 13);
  set_thread_count(1);
  const auto a = parse_cifar10_batch(bytes);
  set_thread_count(4);
  const auto b = parse_cifar10_batch(bytes);
  set_thread_count(0);
  EXPECT_EQ(a, b);
}

TEST(CifarLoad, SplitsAndIds) {
  const int classes[] = {0, 1, 2};
  const auto train = testing::synthetic_images(classes, 5, 1);
  const auto test = testing::synthetic_images(classes, 2, 2);
  const auto dir = testing::temp_dir("load");
  testing::write_cifar_dir(dir, train, test);
  const auto loaded = load_cifar10(dir, CifarSplit::train);
  ASSERT_EQ(loaded.size(), train.size());
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    EXPECT_EQ(loaded[i].id, i);
    EXPECT_EQ(loaded[i].label, train[i].label);
  }
  EXPECT_EQ(load_cifar10(dir, CifarSplit::test).size(), test.size());
  EXPECT_THROW(load_cifar10(dir / "missing", CifarSplit::test), Error);
  std::filesystem::remove_all(dir);
}

TEST(CifarLoad, FilterClassesKeepsOrderAndLimit) {
  const int classes[] = {0, 1, 2};
  const auto images = testing::synthetic_images(classes, 4, 3);
  const int keep[] = {2, 0};
  const auto kept = filter_classes(images, keep, 3);
  ASSERT_EQ(kept.size(), 6u);
  for (std::size_t i = 1; i < kept.size(); ++i) EXPECT_LT(kept[i - 1].id, kept[i].id);
  for (const auto& li : kept) EXPECT_NE(*li.label, 1);
}

TEST(Augment, IdentityVariantIsBitExact) {
  const LabeledImage li{testing::random_image(4), 3, 17};
  for (std::uint64_t seed : {0ull, 1ull, 99ull}) {
    const auto variants = augment_eightfold(li, seed);
    ASSERT_EQ(variants.size(), kVariantCount);
    EXPECT_EQ(variants[0].image.pixels, li.image.pixels);
  }
}

TEST(Augment, ConstantImageFlipIsIdentity) {
  const LabeledImage li{Image(32, 32, 3, 0.37f), 1, 0};
  EXPECT_EQ(augment_eightfold(li, 5)[1].image, li.image);
}

TEST(Augment, HflipIsInvolution) {
  const Image img = testing::random_image(8);
  EXPECT_EQ(hflip(hflip(img)), img);
  EXPECT_EQ(hflip(img).at(3, 0, 1), img.at(3, 31, 1));
}

TEST(Augment, VariantsSatisfyImageInvariants) {
  const LabeledImage li{testing::random_image(9), 4, 3};
  const auto variants = augment_eightfold(li, 21);
  for (const auto& v : variants) {
    EXPECT_EQ(v.image.height, 32);
    EXPECT_EQ(v.image.width, 32);
    EXPECT_EQ(v.label, 4);
    for (float p : v.image.pixels) {
      EXPECT_GE(p, 0.0f);
      EXPECT_LE(p, 1.0f);
    }
  }
  const auto specs = augment_specs(li.id, 21);
  EXPECT_EQ(specs[0].variant_kind, VariantKind::original);
  for (const auto& s : specs) {
    EXPECT_GE(s.crop_origin[0], 0);
    EXPECT_GE(s.crop_origin[1], 0);
    EXPECT_LE(s.crop_origin[0] + s.crop_size[0], 32);
    EXPECT_LE(s.crop_origin[1] + s.crop_size[1], 32);
    EXPECT_GT(s.contrast_gain, 0.0);
  }
}

TEST(Augment, DeterministicAcrossRunsAndThreads) {
  const LabeledImage li{testing::random_image(10), 2, 44};
  set_thread_count(1);
  const auto a = augment_eightfold(li, 7);
  set_thread_count(3);
  const auto b = augment_eightfold(li, 7);
  set_thread_count(0);
  EXPECT_EQ(a, b);
  EXPECT_NE(augment_eightfold(li, 8)[2].image, a[2].image);
}

TEST(Augment, ContrastAroundMidGray) {
  Image img(32, 32, 3, 0.7f);
  const Image up = adjust_contrast(img, 1.25);
  EXPECT_NEAR(up.at(0, 0, 0), 0.5 + 1.25 * 0.2, 1e-6);
  EXPECT_EQ(adjust_contrast(Image(32, 32, 3, 1.0f), 2.0).at(0, 0, 0), 1.0f);
}

TEST(Lanczos, SameSizeIsIdentity) {
  const Image img = testing::random_image(12);
  EXPECT_EQ(lanczos_resize(img, 32, 32), img);
}

TEST(Lanczos, ConstantIsPreserved) {
  const Image img(28, 24, 3, 0.42f);
  for (auto [h, w] : {std::pair{32, 32}, std::pair{9, 13}, std::pair{28, 40}}) {
    const Image out = lanczos_resize(img, h, w);
    for (float v : out.pixels) EXPECT_NEAR(v, 0.42f, 1e-6);
  }
}

// Direct 2-D evaluation of the normalised Lanczos-3 sum at each output pixel.
double reference_sample(const Image& img, int y, int x, int ch, int dst_h, int dst_w) {
  auto kernel = [](double t) {
    if (t == 0.0) return 1.0;
    if (std::abs(t) >= 3.0) return 0.0;
    const double pt = std::numbers::pi * t;
    return 3.0 * std::sin(pt) * std::sin(pt / 3.0) / (pt * pt);
  };
  const double sy = static_cast<double>(dst_h) / img.height;
  const double sx = static_cast<double>(dst_w) / img.width;
  const double fy = std::min(1.0, sy), fx = std::min(1.0, sx);
  const double cy = (y + 0.5) / sy - 0.5, cx = (x + 0.5) / sx - 0.5;
  double num = 0.0, den = 0.0;
  for (int i = -40; i < img.height + 40; ++i)
    for (int j = -40; j < img.width + 40; ++j) {
      const double w = kernel((i - cy) * fy) * kernel((j - cx) * fx);
      if (w == 0.0) continue;
      num += w * img.at(std::clamp(i, 0, img.height - 1), std::clamp(j, 0, img.width - 1), ch);
      den += w;
    }
  return std::clamp(num / den, 0.0, 1.0);
}

TEST(Lanczos, RampMatchesDirectSum) {
  Image ramp(28, 28, 3);
  for (int r = 0; r < 28; ++r)
    for (int c = 0; c < 28; ++c)
      for (int ch = 0; ch < 3; ++ch) ramp.at(r, c, ch) = static_cast<float>(0.1 + 0.6 * (r + 2 * c + ch) / 84.0);
  const Image out = lanczos_resize(ramp, 32, 32);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x)
      for (int ch = 0; ch < 3; ++ch) ASSERT_NEAR(out.at(y, x, ch), reference_sample(ramp, y, x, ch, 32, 32), 1e-4);
}

TEST(Lanczos, DownscaleMatchesDirectSum) {
  const Image img = testing::random_image(14);
  const Image out = lanczos_resize(img, 13, 20);
  for (int y = 0; y < 13; ++y)
    for (int x = 0; x < 20; ++x) ASSERT_NEAR(out.at(y, x, 1), reference_sample(img, y, x, 1, 13, 20), 1e-4);
}

TEST(Lanczos, DegenerateDimsRejected) {
  const Image img = testing::random_image(15);
  EXPECT_THROW(lanczos_resize(img, 2, 32), Error);
  EXPECT_THROW(lanczos_resize(Image(2, 2, 3), 32, 32), Error);
}

}  // namespace
}  // namespace epxhop
