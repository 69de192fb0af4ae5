#include "ampere/core/types.hpp"

#include <cmath>

#include "ampere/core/error.hpp"

namespace ampere {

std::string_view to_string(Domain d) {
  switch (d) {
    case Domain::P: return "P";
    case Domain::S: return "S";
    case Domain::L: return "L";
  }
  return "?";
}

Domain parse_domain(std::string_view s) {
  if (s == "P") return Domain::P;
  if (s == "S") return Domain::S;
  if (s == "L") return Domain::L;
  throw DataError("unknown domain '" + std::string(s) + "'");
}

std::string_view to_string(SummaryStatus s) {
  switch (s) {
    case SummaryStatus::ok: return "ok";
    case SummaryStatus::no_output: return "no_output";
    case SummaryStatus::asr_missing: return "asr_missing";
  }
  return "?";
}

SummaryStatus parse_summary_status(std::string_view s) {
  if (s == "ok") return SummaryStatus::ok;
  if (s == "no_output") return SummaryStatus::no_output;
  if (s == "asr_missing") return SummaryStatus::asr_missing;
  throw DataError("unknown summary status '" + std::string(s) + "'");
}

void ProductInstance::validate() const {
  if (product_id.empty()) throw DataError("product_id empty");
  if (instance_id.empty()) throw DataError("instance_id empty");
  if (frames.rank() != 4) {
    throw DataError("frames must have rank 4 (T, H, W, C), got rank " +
                    std::to_string(frames.rank()));
  }
  if (frames.shape[0] < 1) throw DataError("frames: T must be >= 1");
  for (std::size_t i = 1; i < 4; ++i) {
    if (frames.shape[i] == 0) throw DataError("frames: H, W and C must be > 0");
  }
  if (frames.data.size() != frames.numel()) {
    throw DataError("frames: payload size does not match shape");
  }
  for (float x : frames.data) {
    if (!std::isfinite(x)) throw DataError("frames: non-finite value");
  }
}

std::size_t utf8_length(std::string_view s) {
  std::size_t n = 0;
  for (unsigned char c : s) {
    if ((c & 0xC0) != 0x80) ++n;
  }
  return n;
}

std::vector<std::string> utf8_codepoints(std::string_view s) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < s.size();) {
    std::size_t j = i + 1;
    while (j < s.size() && (static_cast<unsigned char>(s[j]) & 0xC0) == 0x80) ++j;
    out.emplace_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

}  // namespace ampere
