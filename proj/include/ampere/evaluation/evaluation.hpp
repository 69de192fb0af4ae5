#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ampere/core/types.hpp"
#include "ampere/nn/matrix.hpp"
#include "ampere/textproc/summarize.hpp"

namespace ampere {

enum class Task : std::uint8_t { P2S, P2L, S2P, S2L, L2P, L2S };
inline constexpr std::array<Task, 6> kAllTasks{Task::P2S, Task::P2L, Task::S2P,
                                                Task::S2L, Task::L2P, Task::L2S};
std::string_view to_string(Task t);
Task parse_task(std::string_view s);
Domain query_domain(Task t);
Domain gallery_domain(Task t);

struct SimilarityMatrix {
  nn::Matrix scores;  // queries x gallery
  std::vector<std::string> query_products;
  std::vector<std::string> gallery_products;
};

// Dot products of float32 vectors accumulated in double. Throws UsageError
// for an empty side or mismatched widths.
SimilarityMatrix similarity_matrix(const std::vector<EmbeddingRecord>& queries,
                                   const std::vector<EmbeddingRecord>& gallery);

// Gallery indices by descending score; equal scores keep ascending index.
std::vector<std::size_t> rank_gallery(const std::vector<double>& scores);

// Per-query metrics over a ranking and a relevance mask indexed by gallery
// position. recall_at_k is 0 or 1.
double recall_at_k(const std::vector<std::size_t>& ranking, const std::vector<bool>& relevant, int k);
double reciprocal_rank(const std::vector<std::size_t>& ranking, const std::vector<bool>& relevant);
double ndcg_at_10(const std::vector<std::size_t>& ranking, const std::vector<bool>& relevant);

struct TaskMetrics {
  double r1 = 0, r5 = 0, r10 = 0;  // percent
  double mrr = 0, ndcg10 = 0;      // [0, 1]
  std::size_t queries = 0;           // evaluated
  std::size_t excluded_queries = 0;  // no relevant gallery item
  std::size_t gallery = 0;
  // Per evaluated query, in query order: instance id and top-1 hit.
  std::vector<std::string> query_ids;
  std::vector<bool> hit_at_1;
};

TaskMetrics evaluate_task(const std::vector<EmbeddingRecord>& queries,
                          const std::vector<EmbeddingRecord>& gallery);

inline constexpr double kHistogramBinWidth = 0.02;
inline constexpr std::size_t kHistogramBins = 100;  // over [0, 2]

struct DistanceStats {
  std::optional<double> intra_mean;  // empty without any intra pair
  std::optional<double> inter_mean;
  std::size_t intra_pairs = 0;
  std::size_t inter_pairs = 0;      // pairs used
  bool inter_sampled = false;
  std::size_t singleton_products = 0;  // products with a single instance
  std::vector<std::size_t> intra_histogram;
  std::vector<std::size_t> inter_histogram;
};

// Cosine distances (1 - cos) over all instance pairs. Inter-product pairs
// are enumerated when there are at most `pair_cap` of them, otherwise
// `pair_cap` pairs are drawn uniformly with the seeded stream.
DistanceStats distance_stats(const std::vector<EmbeddingRecord>& records,
                             std::size_t pair_cap = 1'000'000, std::uint64_t seed = 0);

struct SignalRow {
  std::string bucket;
  std::size_t queries = 0;
  double percentage = 0;
  std::optional<double> r1;  // percent; empty for an empty bucket
};

// Groups queries by the signal bucket of their summary.
std::vector<SignalRow> signal_report(const std::vector<SummaryRecord>& summaries,
                                     const std::vector<bool>& hit_at_1);

struct EvalOptions {
  std::vector<Task> tasks{kAllTasks.begin(), kAllTasks.end()};
  const textproc::SummaryTable* summaries = nullptr;  // enables signal tables
  bool distances = true;
  std::size_t pair_cap = 1'000'000;
  std::uint64_t seed = 0;
};

struct EvalReport {
  std::map<Task, TaskMetrics> tasks;
  double mr1 = 0;  // mean R1 over the evaluated tasks
  std::optional<DistanceStats> distances;
  std::map<Task, std::vector<SignalRow>> signal;  // S and L query tasks
};

EvalReport evaluate_all(const std::vector<EmbeddingRecord>& records, const EvalOptions& options = {});

nlohmann::json report_json(const EvalReport& report);
// Inverse of report_json (per-query outcomes are not stored). Throws
// DataError for a malformed document.
EvalReport report_from_json(const nlohmann::json& j);
std::string report_text(const EvalReport& report);
// task,R1,R5,R10,MRR,NDCG10,queries,excluded
std::string report_csv(const EvalReport& report);
// bin_start,bin_end,intra,inter
void write_histogram_csv(const DistanceStats& stats, const std::filesystem::path& path);

}  // namespace ampere
