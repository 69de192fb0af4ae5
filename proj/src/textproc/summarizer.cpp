#include "ampere/textproc/summarizer.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>

#include "ampere/core/error.hpp"

namespace ampere::textproc {
namespace {

constexpr std::string_view kInstruction =
    "You are a text cleaning expert who needs to clean and streamline the words "
    "spoken by an anchor during live-streaming sales. Need to remove redundant "
    "information and persuasive words, and retain only objective information "
    "related to the product. Please carefully observe the examples below and "
    "output in the specified format.";

constexpr std::string_view kNameLabel = "Product name:";
constexpr std::string_view kFeaturesLabel = "Features:";

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::string lower_ascii(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

// Case-insensitive search for `label`, also accepting a full-width colon.
std::size_t find_label(std::string_view text, std::string_view label, std::size_t from,
                       std::size_t* label_len) {
  const std::string hay = lower_ascii(text);
  const std::string needle = lower_ascii(label);
  std::size_t best = std::string::npos;
  if (auto p = hay.find(needle, from); p != std::string::npos) {
    best = p;
    *label_len = needle.size();
  }
  const std::string wide = needle.substr(0, needle.size() - 1) + "\xEF\xBC\x9A";  // '：'
  if (auto p = hay.find(wide, from); p != std::string::npos && p < best) {
    best = p;
    *label_len = wide.size();
  }
  return best;
}

std::vector<std::string> split_features(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    auto end = s.find(';', start);
    if (end == std::string_view::npos) end = s.size();
    std::string item = trim(s.substr(start, end - start));
    if (!item.empty() && lower_ascii(item) != "unknown") out.push_back(std::move(item));
    start = end + 1;
  }
  return out;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

void set_signal_level(SummaryRecord& r, std::string_view raw) {
  const std::size_t raw_len = utf8_length(raw);
  r.signal_level = (r.status == SummaryStatus::ok && raw_len > 0)
                       ? static_cast<double>(utf8_length(summary_text(r))) /
                             static_cast<double>(raw_len)
                       : 0.0;
}

SummaryRecord no_output() { return SummaryRecord{{}, {}, SummaryStatus::no_output, 0.0}; }

bool starts_with(std::string_view s, std::string_view prefix) {
  return s.substr(0, prefix.size()) == prefix;
}

std::vector<std::string> split_whitespace(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.emplace_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

}  // namespace

std::string_view to_string(SummarizerKind k) {
  switch (k) {
    case SummarizerKind::llm_remote: return "llm_remote";
    case SummarizerKind::llm_mock: return "llm_mock";
    case SummarizerKind::keyword_baseline: return "keyword";
    case SummarizerKind::raw_passthrough: return "raw";
    case SummarizerKind::name_only: return "name_only";
    case SummarizerKind::features_only: return "features_only";
  }
  return "?";
}

SummarizerKind parse_summarizer_kind(std::string_view s) {
  if (s == "llm_remote") return SummarizerKind::llm_remote;
  if (s == "llm_mock") return SummarizerKind::llm_mock;
  if (s == "keyword" || s == "keyword_baseline") return SummarizerKind::keyword_baseline;
  if (s == "raw" || s == "raw_passthrough") return SummarizerKind::raw_passthrough;
  if (s == "name_only") return SummarizerKind::name_only;
  if (s == "features_only") return SummarizerKind::features_only;
  throw UsageError("unknown summarizer kind '" + std::string(s) + "'");
}

std::vector<Demonstration> default_demonstrations() {
  return {Demonstration{
      "Alright, let's start with the price of 199. Thank you for your support on our "
      "link number 1. This space UFO shaped shaver is very suitable for giving to "
      "boyfriends and husbands. It's a portable and delicate style that can be carried "
      "with you. The material of the blade head is very good, so the experience is very "
      "good. The curved double-ring net blade is thin and moist, it only takes fifteen "
      "to twenty seconds to shave quickly. The longer it is used, the more economical "
      "it is. Charging for one hour can reach 60 days. The charging port is a "
      "universal charging port.",
      "Space UFO shaped shaver",
      {"Price 199 yuan, portable style, exquisite and compact",
       "The blade material is of high quality and provides a good user experience",
       "Curved double ring mesh, shaving is fast and clean",
       "The more you apply, the more effective it becomes, and the longer you use it, "
       "the more economical it becomes",
       "Easy to charge, long battery life, universal charging port"}}};
}

std::string build_prompt(std::string_view raw_asr,
                         const std::vector<Demonstration>& demonstrations) {
  if (raw_asr.empty()) throw UsageError("build_prompt: empty transcript");
  if (demonstrations.empty()) {
    throw UsageError("build_prompt: at least one demonstration is required");
  }
  std::string p(kInstruction);
  p += "\n\n";
  for (const auto& d : demonstrations) {
    p += "Example:\nInput: ";
    p += d.input;
    p += "\nOutput:\n";
    p += render_output(SummaryRecord{d.product_name, d.features, SummaryStatus::ok, 0.0});
    p += "\n\n";
  }
  p += "Input: ";
  p += raw_asr;
  p += "\nOutput:\n";
  p += kNameLabel;
  p += " ${name of the product}\n";
  p += kFeaturesLabel;
  p += " ${major features of the product}\n";
  return p;
}

SummaryRecord parse_llm_output(std::string_view completion) {
  std::size_t name_len = 0;
  const std::size_t name_at = find_label(completion, kNameLabel, 0, &name_len);
  if (name_at == std::string::npos) return no_output();
  const std::size_t name_begin = name_at + name_len;

  std::size_t feat_len = 0;
  const std::size_t feat_at = find_label(completion, kFeaturesLabel, name_begin, &feat_len);
  std::size_t name_end = completion.find('\n', name_begin);
  if (feat_at != std::string::npos) name_end = std::min(name_end, feat_at);
  if (name_end == std::string::npos) name_end = completion.size();

  std::string name = trim(completion.substr(name_begin, name_end - name_begin));
  while (!name.empty() && name.back() == ';') name = trim(name.substr(0, name.size() - 1));
  if (name.empty() || lower_ascii(name) == "unknown") return no_output();

  SummaryRecord r;
  r.product_name = std::move(name);
  r.status = SummaryStatus::ok;
  if (feat_at != std::string::npos) {
    const std::size_t begin = feat_at + feat_len;
    std::size_t end = completion.find('\n', begin);
    if (end == std::string::npos) end = completion.size();
    r.features = split_features(completion.substr(begin, end - begin));
  }
  return r;
}

std::string render_output(const SummaryRecord& r) {
  std::string out(kNameLabel);
  out += ' ';
  out += r.product_name;
  out += '\n';
  out += kFeaturesLabel;
  out += ' ';
  out += join(r.features, "; ");
  return out;
}

std::string summary_text(const SummaryRecord& r) {
  std::vector<std::string> parts;
  if (!r.product_name.empty()) parts.push_back(r.product_name);
  parts.insert(parts.end(), r.features.begin(), r.features.end());
  return join(parts, "; ");
}

std::string encoder_text(const SummaryRecord& r) {
  switch (r.status) {
    case SummaryStatus::ok: return render_output(r);
    case SummaryStatus::no_output: return std::string(kNoOutputText);
    case SummaryStatus::asr_missing: return std::string(kMissingAsr);
  }
  return std::string(kNoOutputText);
}

SummaryRecord mock_summarize(std::string_view raw, const MarkerGrammar& grammar) {
  std::vector<std::string> names, features;
  auto push_unique = [](std::vector<std::string>& v, std::string s) {
    if (!s.empty() && std::find(v.begin(), v.end(), s) == v.end()) v.push_back(std::move(s));
  };
  for (const auto& word : split_whitespace(raw)) {
    if (starts_with(word, grammar.name_marker)) {
      push_unique(names, word.substr(grammar.name_marker.size()));
    } else if (starts_with(word, grammar.feature_marker)) {
      push_unique(features, word.substr(grammar.feature_marker.size()));
    }
  }
  if (names.empty()) return no_output();
  SummaryRecord r{join(names, " "), std::move(features), SummaryStatus::ok, 0.0};
  set_signal_level(r, raw);
  return r;
}

const StopwordSet& default_stopwords() {
  static const StopwordSet words = {
      "a",     "about", "after", "again", "all",   "also",  "am",    "an",    "and",
      "any",   "are",   "as",    "at",    "be",    "been",  "but",   "by",    "can",
      "could", "did",   "do",    "does",  "for",   "from",  "had",   "has",   "have",
      "he",    "her",   "here",  "him",   "his",   "how",   "i",     "if",    "in",
      "into",  "is",    "it",    "its",   "just",  "me",    "more",  "my",    "no",
      "not",   "now",   "of",    "on",    "one",   "or",    "our",   "out",   "she",
      "so",    "some",  "such",  "than",  "that",  "the",   "their", "them",  "then",
      "there", "these", "they",  "this",  "those", "to",    "too",   "up",    "us",
      "very",  "was",   "we",    "were",  "what",  "when",  "which", "who",   "will",
      "with",  "would", "you",   "your",  "yes",   "oh",    "ok",    "okay",  "well"};
  return words;
}

SummaryRecord keyword_baseline(std::string_view raw, int k, const StopwordSet& stopwords) {
  if (k < 1) throw UsageError("keyword_baseline: k must be >= 1");
  std::map<std::string, std::pair<int, std::size_t>> stats;  // count, first position
  std::size_t pos = 0;
  for (auto word : split_whitespace(raw)) {
    for (auto marker : {kNameMarker, kFeatureMarker}) {
      if (starts_with(word, marker)) word = word.substr(marker.size());
    }
    const auto first = word.find_first_not_of(".,;:!?\"'()");
    const auto last = word.find_last_not_of(".,;:!?\"'()");
    if (first == std::string::npos) continue;
    std::string token = lower_ascii(word.substr(first, last - first + 1));
    if (stopwords.count(token)) continue;
    auto [it, inserted] = stats.emplace(token, std::make_pair(0, pos++));
    ++it->second.first;
  }
  if (stats.empty()) return no_output();
  std::vector<std::pair<std::string, std::pair<int, std::size_t>>> ranked(stats.begin(),
                                                                          stats.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second.first != b.second.first) return a.second.first > b.second.first;
    return a.second.second < b.second.second;
  });
  SummaryRecord r;
  r.status = SummaryStatus::ok;
  r.product_name = ranked.front().first;
  for (std::size_t i = 0; i < ranked.size() && i < static_cast<std::size_t>(k); ++i) {
    r.features.push_back(ranked[i].first);
  }
  set_signal_level(r, raw);
  return r;
}

std::size_t signal_bucket_index(double level) {
  if (!(level >= 0.0)) throw UsageError("signal level must be >= 0");
  if (level == 0.0) return 0;
  if (level < 0.05) return 1;
  if (level < 0.1) return 2;
  if (level < 0.15) return 3;
  if (level < 0.2) return 4;
  if (level < 0.25) return 5;
  return 6;
}

std::string_view signal_bucket(double level) { return kSignalBuckets[signal_bucket_index(level)]; }

}  // namespace ampere::textproc
