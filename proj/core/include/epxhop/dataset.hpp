#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "epxhop/image.hpp"

namespace epxhop {

// ---------------------------------------------------------------------------
// CIFAR-10 binary batches.
//
// Each record is 3073 bytes: one label byte followed by three 32x32 planes
// (R, then G, then B), each row-major. data_batch_{1..5}.bin hold the
// 50,000 training records, test_batch.bin the 10,000 test records.
// ---------------------------------------------------------------------------
inline constexpr std::size_t kCifarRecordBytes = 3073;

// Ids are assigned first_id, first_id + 1, ... in record order.
std::vector<LabeledImage> parse_cifar10_batch(std::span<const std::uint8_t> bytes,
                                              std::uint32_t first_id = 0);

// Inverse of parse_cifar10_batch for 32x32x3 labeled images.
std::vector<std::uint8_t> serialize_cifar10_batch(std::span<const LabeledImage> images);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

enum class CifarSplit { train, test };

// Loads a split from the standard file names under dir. Training ids run
// 0..49999 and test ids 0..9999.
std::vector<LabeledImage> load_cifar10(const std::filesystem::path& dir, CifarSplit split);

// Keeps images whose label is in classes, preserving order. At most
// per_class_limit images per class when the limit is nonzero.
std::vector<LabeledImage> filter_classes(std::span<const LabeledImage> images,
                                         std::span<const int> classes,
                                         std::size_t per_class_limit = 0);

// ---------------------------------------------------------------------------
// Augmentation
// ---------------------------------------------------------------------------
enum class VariantKind : std::uint8_t {
  original,
  hflip,
  crop_square,
  crop_rect_wide,
  crop_rect_tall,
  contrast_up,
  contrast_down,
  hflip_crop,
};

inline constexpr std::size_t kVariantCount = 8;

struct AugmentSpec {
  VariantKind variant_kind = VariantKind::original;
  std::array<int, 2> crop_origin{0, 0};  // (row, col)
  std::array<int, 2> crop_size{kImageSize, kImageSize};  // (h, w)
  double contrast_gain = 1.0;
  std::uint64_t rng_seed = 0;
};

// The eight fixed variants for one image. Crop origins come from a
// counter-based generator keyed by (seed, image id, variant index).
std::array<AugmentSpec, kVariantCount> augment_specs(std::uint32_t image_id, std::uint64_t seed);

Image apply_augment(const Image& img, const AugmentSpec& spec);

std::vector<LabeledImage> augment_eightfold(const LabeledImage& img, std::uint64_t seed);

Image hflip(const Image& img);
Image crop(const Image& img, int row, int col, int h, int w);
// out = clamp(0.5 + gain * (in - 0.5)), per channel
Image adjust_contrast(const Image& img, double gain);

// Separable Lanczos-3 resampling with pixel-centre alignment and replicated
// borders; output clamped to [0, 1]. Same-size requests return a copy.
Image lanczos_resize(const Image& img, int target_h, int target_w);

double lanczos3(double x);

// SplitMix64 finaliser; the counter-based generator behind augmentation.
std::uint64_t mix64(std::uint64_t x);

}  // namespace epxhop
