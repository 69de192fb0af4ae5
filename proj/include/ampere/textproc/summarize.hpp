#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <vector>

#include "ampere/core/types.hpp"
#include "ampere/textproc/llm_client.hpp"
#include "ampere/textproc/summarizer.hpp"

namespace ampere::textproc {

struct SummarizeOptions {
  LlmClient* client = nullptr;  // required for llm_remote
  std::vector<Demonstration> demonstrations = default_demonstrations();
  MarkerGrammar grammar;
  int keyword_k = 5;
};

// Summarises one instance. Missing ASR short-circuits to asr_missing without
// touching any backend; product-page titles are used verbatim (they are not
// ASR). Throws LlmTransportError when the remote backend gives up.
SummaryRecord summarize(const ProductInstance& instance, SummarizerKind kind,
                        const SummarizeOptions& options = {});

// Batch form. Remote calls run with at most `max_in_flight` concurrent
// requests; with `degrade_on_failure` a transport failure becomes no_output.
std::vector<SummaryRecord> summarize_all(const std::vector<ProductInstance>& instances,
                                         SummarizerKind kind,
                                         const SummarizeOptions& options = {},
                                         int max_in_flight = 4,
                                         bool degrade_on_failure = true);

// Summaries keyed by instance id: JSONL {instance_id, status, product_name,
// features, signal_level}.
using SummaryTable = std::map<std::string, SummaryRecord>;
void save_summaries(const std::vector<std::string>& instance_ids,
                    const std::vector<SummaryRecord>& records,
                    const std::filesystem::path& path);
SummaryTable load_summaries(const std::filesystem::path& path);

struct SummarizerSample {
  SummaryRecord record;
  std::string true_name;
  std::vector<std::string> true_attributes;
  Domain domain = Domain::S;
};

struct SummarizerScores {
  std::size_t samples = 0;
  double name_accuracy = 0.0;
  double attr_recall = 0.0;
  // Averaged over samples with at least one extracted feature; empty when
  // no sample extracted anything.
  std::optional<double> attr_accuracy;
};

struct SummarizerEvaluation {
  std::map<Domain, SummarizerScores> per_domain;
  SummarizerScores overall;
};

// Throws UsageError on empty input.
SummarizerEvaluation evaluate_summarizer(const std::vector<SummarizerSample>& samples);

}  // namespace ampere::textproc
