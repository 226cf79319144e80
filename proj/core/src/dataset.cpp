#include "epxhop/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <string>

#include "epxhop/error.hpp"
#include "epxhop/parallel.hpp"

namespace epxhop {
namespace {

constexpr std::size_t kPlane = static_cast<std::size_t>(kImageSize) * kImageSize;

struct Tap {
  int index;
  double weight;
};

// Normalised Lanczos-3 taps for every output coordinate along one axis.
std::vector<std::vector<Tap>> axis_taps(int src, int dst) {
  const double scale = static_cast<double>(dst) / src;
  const double filter_scale = std::min(1.0, scale);
  const double support = 3.0 / filter_scale;
  std::vector<std::vector<Tap>> taps(static_cast<std::size_t>(dst));
  for (int x = 0; x < dst; ++x) {
    const double center = (x + 0.5) / scale - 0.5;
    const int lo = static_cast<int>(std::floor(center - support));
    const int hi = static_cast<int>(std::ceil(center + support));
    double total = 0.0;
    auto& row = taps[static_cast<std::size_t>(x)];
    for (int i = lo; i <= hi; ++i) {
      const double w = lanczos3((i - center) * filter_scale);
      if (w == 0.0) continue;
      row.push_back({std::clamp(i, 0, src - 1), w});
      total += w;
    }
    for (auto& t : row) t.weight /= total;
  }
  return taps;
}

void require_cifar_shape(const Image& img) {
  if (img.height != kImageSize || img.width != kImageSize || img.channels != 3) {
    throw Error(Errc::invalid_argument, "augmentation expects a 32x32x3 image");
  }
}

}  // namespace

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::vector<LabeledImage> parse_cifar10_batch(std::span<const std::uint8_t> bytes,
                                              std::uint32_t first_id) {
  if (bytes.empty() || bytes.size() % kCifarRecordBytes != 0) {
    const std::size_t offset = (bytes.size() / kCifarRecordBytes) * kCifarRecordBytes;
    throw Error(Errc::malformed_file,
                "CIFAR-10 batch length " + std::to_string(bytes.size()) +
                    " is not a positive multiple of 3073 (incomplete record at byte " +
                    std::to_string(offset) + ")",
                offset);
  }
  const std::size_t n = bytes.size() / kCifarRecordBytes;
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t label = bytes[i * kCifarRecordBytes];
    if (label >= kCifarClasses) {
      throw Error(Errc::invalid_label,
                  "record " + std::to_string(i) + " has label byte " + std::to_string(label),
                  i);
    }
  }

  std::vector<LabeledImage> out(n);
  parallel_for(n, [&](std::size_t i) {
    const std::uint8_t* rec = bytes.data() + i * kCifarRecordBytes;
    LabeledImage& li = out[i];
    li.label = rec[0];
    li.id = first_id + static_cast<std::uint32_t>(i);
    li.image = Image(kImageSize, kImageSize, 3);
    for (int c = 0; c < 3; ++c)
      for (int r = 0; r < kImageSize; ++r)
        for (int col = 0; col < kImageSize; ++col)
          li.image.at(r, col, c) =
              static_cast<float>(rec[1 + c * kPlane + static_cast<std::size_t>(r) * kImageSize + col]) /
              255.0f;
  });
  return out;
}

std::vector<std::uint8_t> serialize_cifar10_batch(std::span<const LabeledImage> images) {
  std::vector<std::uint8_t> out(images.size() * kCifarRecordBytes);
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto& li = images[i];
    require_cifar_shape(li.image);
    std::uint8_t* rec = out.data() + i * kCifarRecordBytes;
    rec[0] = static_cast<std::uint8_t>(li.label.value_or(0));
    for (int c = 0; c < 3; ++c)
      for (int r = 0; r < kImageSize; ++r)
        for (int col = 0; col < kImageSize; ++col) {
          const float v = std::clamp(li.image.at(r, col, c), 0.0f, 1.0f);
          rec[1 + c * kPlane + static_cast<std::size_t>(r) * kImageSize + col] =
              static_cast<std::uint8_t>(std::lround(v * 255.0f));
        }
  }
  return out;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot open " + path.string());
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  std::vector<std::uint8_t> bytes(size);
  if (size > 0 && !in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size))) {
    throw Error(Errc::io, "failed reading " + path.string());
  }
  return bytes;
}

std::vector<LabeledImage> load_cifar10(const std::filesystem::path& dir, CifarSplit split) {
  std::vector<std::string> names;
  if (split == CifarSplit::train) {
    for (int b = 1; b <= 5; ++b) names.push_back("data_batch_" + std::to_string(b) + ".bin");
  } else {
    names.push_back("test_batch.bin");
  }
  std::vector<LabeledImage> all;
  for (const auto& name : names) {
    const auto bytes = read_file_bytes(dir / name);
    auto batch = parse_cifar10_batch(bytes, static_cast<std::uint32_t>(all.size()));
    all.insert(all.end(), std::make_move_iterator(batch.begin()),
               std::make_move_iterator(batch.end()));
  }
  return all;
}

std::vector<LabeledImage> filter_classes(std::span<const LabeledImage> images,
                                         std::span<const int> classes,
                                         std::size_t per_class_limit) {
  std::vector<std::size_t> taken(classes.size(), 0);
  std::vector<LabeledImage> out;
  for (const auto& li : images) {
    if (!li.label) continue;
    const auto it = std::find(classes.begin(), classes.end(), *li.label);
    if (it == classes.end()) continue;
    auto& count = taken[static_cast<std::size_t>(it - classes.begin())];
    if (per_class_limit != 0 && count >= per_class_limit) continue;
    ++count;
    out.push_back(li);
  }
  return out;
}

double lanczos3(double x) {
  constexpr double a = 3.0;
  if (x == 0.0) return 1.0;
  if (x <= -a || x >= a) return 0.0;
  const double px = std::numbers::pi * x;
  return a * std::sin(px) * std::sin(px / a) / (px * px);
}

Image lanczos_resize(const Image& img, int target_h, int target_w) {
  if (img.height < 3 || img.width < 3 || target_h < 3 || target_w < 3) {
    throw Error(Errc::invalid_argument, "lanczos_resize needs source and target dims >= 3");
  }
  if (target_h == img.height && target_w == img.width) return img;

  const auto col_taps = axis_taps(img.width, target_w);
  const auto row_taps = axis_taps(img.height, target_h);
  const int ch = img.channels;

  std::vector<double> horiz(static_cast<std::size_t>(img.height) * target_w * ch, 0.0);
  for (int r = 0; r < img.height; ++r)
    for (int x = 0; x < target_w; ++x)
      for (int c = 0; c < ch; ++c) {
        double acc = 0.0;
        for (const auto& t : col_taps[static_cast<std::size_t>(x)]) acc += t.weight * img.at(r, t.index, c);
        horiz[(static_cast<std::size_t>(r) * target_w + x) * ch + c] = acc;
      }

  Image out(target_h, target_w, ch);
  for (int y = 0; y < target_h; ++y)
    for (int x = 0; x < target_w; ++x)
      for (int c = 0; c < ch; ++c) {
        double acc = 0.0;
        for (const auto& t : row_taps[static_cast<std::size_t>(y)])
          acc += t.weight * horiz[(static_cast<std::size_t>(t.index) * target_w + x) * ch + c];
        out.at(y, x, c) = static_cast<float>(std::clamp(acc, 0.0, 1.0));
      }
  return out;
}

Image hflip(const Image& img) {
  Image out(img.height, img.width, img.channels);
  for (int r = 0; r < img.height; ++r)
    for (int col = 0; col < img.width; ++col)
      for (int c = 0; c < img.channels; ++c) out.at(r, col, c) = img.at(r, img.width - 1 - col, c);
  return out;
}

Image crop(const Image& img, int row, int col, int h, int w) {
  if (row < 0 || col < 0 || h <= 0 || w <= 0 || row + h > img.height || col + w > img.width) {
    throw Error(Errc::invalid_argument, "crop window lies outside the image");
  }
  Image out(h, w, img.channels);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      for (int k = 0; k < img.channels; ++k) out.at(r, c, k) = img.at(row + r, col + c, k);
  return out;
}

Image adjust_contrast(const Image& img, double gain) {
  Image out = img;
  for (auto& v : out.pixels) {
    v = static_cast<float>(std::clamp(0.5 + gain * (static_cast<double>(v) - 0.5), 0.0, 1.0));
  }
  return out;
}

std::array<AugmentSpec, kVariantCount> augment_specs(std::uint32_t image_id, std::uint64_t seed) {
  std::array<AugmentSpec, kVariantCount> specs{};
  const std::uint64_t image_key = mix64(mix64(seed) ^ image_id);
  for (std::size_t v = 0; v < kVariantCount; ++v) {
    auto& s = specs[v];
    s.variant_kind = static_cast<VariantKind>(v);
    s.rng_seed = mix64(image_key + v);
  }

  auto place = [](AugmentSpec& s, int h, int w) {
    s.crop_size = {h, w};
    const auto rows = static_cast<std::uint64_t>(kImageSize - h + 1);
    const auto cols = static_cast<std::uint64_t>(kImageSize - w + 1);
    s.crop_origin = {static_cast<int>(mix64(s.rng_seed) % rows),
                     static_cast<int>(mix64(s.rng_seed ^ 0x5bd1e995ULL) % cols)};
  };
  place(specs[2], 28, 28);
  place(specs[3], 24, 28);
  place(specs[4], 28, 24);
  specs[5].contrast_gain = 1.25;
  specs[6].contrast_gain = 0.8;
  place(specs[7], 28, 28);
  return specs;
}

Image apply_augment(const Image& img, const AugmentSpec& spec) {
  auto cropped = [&] {
    const Image c = crop(img, spec.crop_origin[0], spec.crop_origin[1], spec.crop_size[0],
                         spec.crop_size[1]);
    return lanczos_resize(c, img.height, img.width);
  };
  switch (spec.variant_kind) {
    case VariantKind::original:
      return img;
    case VariantKind::hflip:
      return hflip(img);
    case VariantKind::crop_square:
    case VariantKind::crop_rect_wide:
    case VariantKind::crop_rect_tall:
      return cropped();
    case VariantKind::contrast_up:
    case VariantKind::contrast_down:
      return adjust_contrast(img, spec.contrast_gain);
    case VariantKind::hflip_crop:
      return hflip(cropped());
  }
  return img;
}

std::vector<LabeledImage> augment_eightfold(const LabeledImage& img, std::uint64_t seed) {
  require_cifar_shape(img.image);
  const auto specs = augment_specs(img.id, seed);
  std::vector<LabeledImage> out;
  out.reserve(kVariantCount);
  for (const auto& spec : specs) {
    out.push_back({apply_augment(img.image, spec), img.label, img.id});
  }
  return out;
}

}  // namespace epxhop
