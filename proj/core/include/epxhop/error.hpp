#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace epxhop {

// Every failure raised by the library carries one of these codes. The CLI
// maps them onto process exit codes through error_class().
enum class Errc {
  // configuration
  invalid_config,
  unknown_config_key,
  configuration,  // e.g. energy thresholds leave no forwarded channel
  // data
  malformed_file,
  invalid_label,
  degenerate_input,
  insufficient_samples,
  missing_class,
  dimension_mismatch,
  invalid_argument,
  io,
  // model container
  bad_magic,
  bad_version,
  checksum_mismatch,
  unknown_chunk,
  corrupt_model,
  // everything else
  internal,
};

enum class ErrorClass { config = 2, data = 3, model = 4, internal = 5 };

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message,
        std::optional<std::uint64_t> detail = std::nullopt)
      : std::runtime_error(message), code_(code), detail_(detail) {}

  Errc code() const noexcept { return code_; }

  // Byte offset for malformed files, record index for invalid labels.
  std::optional<std::uint64_t> detail() const noexcept { return detail_; }

 private:
  Errc code_;
  std::optional<std::uint64_t> detail_;
};

inline ErrorClass error_class(Errc code) noexcept {
  switch (code) {
    case Errc::invalid_config:
    case Errc::unknown_config_key:
    case Errc::configuration:
      return ErrorClass::config;
    case Errc::malformed_file:
    case Errc::invalid_label:
    case Errc::degenerate_input:
    case Errc::insufficient_samples:
    case Errc::missing_class:
    case Errc::dimension_mismatch:
    case Errc::invalid_argument:
    case Errc::io:
      return ErrorClass::data;
    case Errc::bad_magic:
    case Errc::bad_version:
    case Errc::checksum_mismatch:
    case Errc::unknown_chunk:
    case Errc::corrupt_model:
      return ErrorClass::model;
    case Errc::internal:
      break;
  }
  return ErrorClass::internal;
}

inline std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::invalid_config: return "invalid-config";
    case Errc::unknown_config_key: return "unknown-config-key";
    case Errc::configuration: return "configuration";
    case Errc::malformed_file: return "malformed-file";
    case Errc::invalid_label: return "invalid-label";
    case Errc::degenerate_input: return "degenerate-input";
    case Errc::insufficient_samples: return "insufficient-samples";
    case Errc::missing_class: return "missing-class";
    case Errc::dimension_mismatch: return "dimension-mismatch";
    case Errc::invalid_argument: return "invalid-argument";
    case Errc::io: return "io";
    case Errc::bad_magic: return "bad-magic";
    case Errc::bad_version: return "bad-version";
    case Errc::checksum_mismatch: return "checksum-mismatch";
    case Errc::unknown_chunk: return "unknown-chunk";
    case Errc::corrupt_model: return "corrupt-model";
    case Errc::internal: return "internal";
  }
  return "internal";
}

}  // namespace epxhop
