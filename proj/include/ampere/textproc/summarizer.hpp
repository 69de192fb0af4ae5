#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "ampere/core/types.hpp"

namespace ampere::textproc {

enum class SummarizerKind : std::uint8_t {
  llm_remote,
  llm_mock,
  keyword_baseline,
  raw_passthrough,
  name_only,      // llm_mock output with the features dropped
  features_only,  // llm_mock output with the name dropped
};

std::string_view to_string(SummarizerKind k);
SummarizerKind parse_summarizer_kind(std::string_view s);

// One in-context example: a transcript and the summary it should produce.
struct Demonstration {
  std::string input;
  std::string product_name;
  std::vector<std::string> features;
};

// The shaver example that accompanies the instruction by default.
std::vector<Demonstration> default_demonstrations();

// Instruction, demonstrations in order, then the query transcript and the
// output-format stanza. Throws UsageError for an empty transcript or no
// demonstrations.
std::string build_prompt(std::string_view raw_asr,
                         const std::vector<Demonstration>& demonstrations);

// Parses "Product name: ...\nFeatures: a; b" (or the single-line form with a
// semicolon before "Features:"). Never throws: an unlabelled completion or an
// "Unknown" name yields status no_output with empty fields.
SummaryRecord parse_llm_output(std::string_view completion);

// Inverse of parse_llm_output for records with a non-empty name.
std::string render_output(const SummaryRecord& r);

// Content whose length defines the signal level: name and features joined
// with "; ".
std::string summary_text(const SummaryRecord& r);

// What the text encoder reads for a summary. Non-ok records fall back to the
// literal strings used for missing and failed summaries.
std::string encoder_text(const SummaryRecord& r);
inline constexpr std::string_view kNoOutputText = "Product name: Unknown; Features: Unknown";

struct MarkerGrammar {
  std::string name_marker{kNameMarker};
  std::string feature_marker{kFeatureMarker};
};

// Deterministic stand-in for the LLM: collects marker-prefixed words in
// order, dropping repeats. No name marker means no_output.
SummaryRecord mock_summarize(std::string_view raw, const MarkerGrammar& grammar = {});

using StopwordSet = std::unordered_set<std::string>;
const StopwordSet& default_stopwords();

// Frequency keywords: the k most frequent non-stopword words (ties by first
// occurrence) become features, the top one the name. Marker code points and
// edge punctuation are stripped, ASCII is lower-cased.
SummaryRecord keyword_baseline(std::string_view raw, int k,
                               const StopwordSet& stopwords = default_stopwords());

// Robustness-table bucket labels, lowest first.
inline constexpr std::array<std::string_view, 7> kSignalBuckets{
    "0 (LLM No-output)", "(0,0.05)",   "[0.05,0.1)", "[0.1,0.15)",
    "[0.15,0.2)",        "[0.2,0.25)", "≥0.25"};

// Index into kSignalBuckets; throws UsageError for negative or NaN levels.
std::size_t signal_bucket_index(double level);
std::string_view signal_bucket(double level);

}  // namespace ampere::textproc
