#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "ampere/core/tensor_io.hpp"

namespace ampere {

// The three E-commerce domains a product is exhibited in. Iteration order is
// always P, S, L.
enum class Domain : std::uint8_t { P = 0, S = 1, L = 2 };

inline constexpr std::array<Domain, 3> kAllDomains{Domain::P, Domain::S,
                                                   Domain::L};

std::string_view to_string(Domain d);
Domain parse_domain(std::string_view s);

// Placeholder transcript for videos without any ASR output.
inline constexpr std::string_view kMissingAsr = "\\N\\N";

// Single code-point annotations the synthetic corpus places in front of
// product-name and product-feature words inside transcripts.
inline constexpr std::string_view kNameMarker = "\u25B8";     // ▸
inline constexpr std::string_view kFeatureMarker = "\u25B9";  // ▹

struct ProductInstance {
  std::string product_id;
  std::string instance_id;
  Domain domain = Domain::P;
  Tensor frames;  // (T, H, W, C)
  std::string raw_text;

  std::uint32_t num_frames() const { return frames.shape.at(0); }
  std::uint32_t height() const { return frames.shape.at(1); }
  std::uint32_t width() const { return frames.shape.at(2); }
  std::uint32_t channels() const { return frames.shape.at(3); }

  // Throws DataError naming the offending field.
  void validate() const;

  bool operator==(const ProductInstance&) const = default;
};

enum class SummaryStatus : std::uint8_t { ok, no_output, asr_missing };

std::string_view to_string(SummaryStatus s);
SummaryStatus parse_summary_status(std::string_view s);

struct SummaryRecord {
  std::string product_name;
  std::vector<std::string> features;
  SummaryStatus status = SummaryStatus::no_output;
  double signal_level = 0.0;

  bool operator==(const SummaryRecord&) const = default;
};

struct EmbeddingRecord {
  std::string product_id;
  std::string instance_id;
  Domain domain = Domain::P;
  std::vector<float> vector;

  bool operator==(const EmbeddingRecord&) const = default;
};

// Number of Unicode scalar values in a UTF-8 string.
std::size_t utf8_length(std::string_view s);

// Splits a UTF-8 string into one std::string per code point.
std::vector<std::string> utf8_codepoints(std::string_view s);

}  // namespace ampere
