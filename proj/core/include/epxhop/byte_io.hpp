#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace epxhop {

// Little-endian encoder for model-container payloads. Floating values are
// always written as 64-bit IEEE-754 regardless of their in-memory width.
class ByteWriter {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f64(double v);
  void str(std::string_view s);
  void raw(std::span<const std::uint8_t> data);

  void vec(const Eigen::VectorXd& v);
  void mat(const Eigen::MatrixXd& m);  // rows, cols, then row-major values
  void f64s(std::span<const double> values);

  const std::vector<std::uint8_t>& bytes() const noexcept { return bytes_; }
  std::vector<std::uint8_t> take() && { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

// Bounds-checked decoder; any over-read throws Errc::corrupt_model naming
// the payload being decoded.
class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> data, std::string what)
      : data_(data), what_(std::move(what)) {}

  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  double f64();
  std::string str();

  Eigen::VectorXd vec();
  Eigen::MatrixXd mat();
  std::vector<double> f64s();

  // Reads a u64 element count and rejects counts that cannot fit in the
  // remaining payload given a minimum per-element size.
  std::size_t count(std::size_t min_element_bytes);

  std::size_t remaining() const noexcept { return data_.size() - pos_; }
  bool done() const noexcept { return pos_ == data_.size(); }
  void expect_done() const;

 private:
  std::span<const std::uint8_t> take(std::size_t n);

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
  std::string what_;
};

std::uint32_t crc32(std::span<const std::uint8_t> data);

}  // namespace epxhop
