#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ampere {

// Tokenizer table. Ids 0..2 are reserved for [PAD], [UNK] and [CLS]; every
// other entry is a word or single code point matched greedily.
class Vocab {
 public:
  static constexpr std::int32_t kPad = 0;
  static constexpr std::int32_t kUnk = 1;
  static constexpr std::int32_t kCls = 2;

  Vocab();
  explicit Vocab(std::vector<std::string> entries);

  // Collects every code point seen in `texts` plus every pre-token that
  // occurs at least `min_count` times. Entries are sorted for stability.
  static Vocab build(const std::vector<std::string>& texts, int min_count = 2);

  std::int32_t size() const { return static_cast<std::int32_t>(entries_.size()); }
  const std::vector<std::string>& entries() const { return entries_; }
  std::int32_t find(std::string_view piece) const;  // -1 when absent
  const std::string& piece(std::int32_t id) const { return entries_.at(id); }
  std::size_t max_piece_codepoints() const { return max_piece_cp_; }

  bool operator==(const Vocab& other) const { return entries_ == other.entries_; }

 private:
  void index();

  std::vector<std::string> entries_;
  std::unordered_map<std::string, std::int32_t> lookup_;
  std::size_t max_piece_cp_ = 1;
};

// Whitespace split, then punctuation (":;,.-") split into standalone pieces.
std::vector<std::string> pretokenize(std::string_view text);

}  // namespace ampere
