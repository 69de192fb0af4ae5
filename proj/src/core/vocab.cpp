#include "ampere/core/vocab.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "ampere/core/error.hpp"
#include "ampere/core/types.hpp"

namespace ampere {
namespace {

const std::vector<std::string> kSpecials = {"[PAD]", "[UNK]", "[CLS]"};

bool is_space(const std::string& cp) {
  return cp == " " || cp == "\t" || cp == "\n" || cp == "\r";
}

bool is_separator(const std::string& cp) {
  static const std::set<std::string> seps = {
      ":", ";", ",", ".", "-", "!", "?", "(", ")",
      std::string(kNameMarker), std::string(kFeatureMarker)};
  return seps.count(cp) > 0;
}

}  // namespace

Vocab::Vocab() : entries_(kSpecials) { index(); }

Vocab::Vocab(std::vector<std::string> entries) : entries_(std::move(entries)) {
  if (entries_.size() < kSpecials.size() ||
      !std::equal(kSpecials.begin(), kSpecials.end(), entries_.begin())) {
    throw DataError("vocab must start with [PAD], [UNK], [CLS]");
  }
  index();
}

void Vocab::index() {
  lookup_.clear();
  max_piece_cp_ = 1;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (!lookup_.emplace(entries_[i], static_cast<std::int32_t>(i)).second) {
      throw DataError("duplicate vocab entry '" + entries_[i] + "'");
    }
    if (i >= kSpecials.size()) {
      max_piece_cp_ = std::max(max_piece_cp_, utf8_length(entries_[i]));
    }
  }
}

std::int32_t Vocab::find(std::string_view piece) const {
  auto it = lookup_.find(std::string(piece));
  return it == lookup_.end() ? -1 : it->second;
}

Vocab Vocab::build(const std::vector<std::string>& texts, int min_count) {
  std::set<std::string> chars;
  std::map<std::string, int> counts;
  for (const auto& t : texts) {
    for (auto& cp : utf8_codepoints(t)) {
      if (!is_space(cp)) chars.insert(std::move(cp));
    }
    for (auto& w : pretokenize(t)) ++counts[w];
  }
  std::set<std::string> pieces(chars.begin(), chars.end());
  for (const auto& [w, c] : counts) {
    if (c >= min_count) pieces.insert(w);
  }
  for (const auto& s : kSpecials) pieces.erase(s);
  std::vector<std::string> entries = kSpecials;
  entries.insert(entries.end(), pieces.begin(), pieces.end());
  return Vocab(std::move(entries));
}

std::vector<std::string> pretokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (auto& cp : utf8_codepoints(text)) {
    if (is_space(cp)) {
      flush();
    } else if (is_separator(cp)) {
      flush();
      out.push_back(cp);
    } else {
      cur += cp;
    }
  }
  flush();
  return out;
}

}  // namespace ampere
