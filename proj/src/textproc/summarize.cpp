#include "ampere/textproc/summarize.hpp"

#include <atomic>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>

#include <json.hpp>

namespace ampere::textproc {
namespace {

SummaryRecord finish(SummaryRecord r, std::string_view raw) {
  if (r.status == SummaryStatus::ok && r.product_name.empty() && r.features.empty()) {
    r.status = SummaryStatus::no_output;
  }
  const std::size_t raw_len = utf8_length(raw);
  r.signal_level = (r.status == SummaryStatus::ok && raw_len > 0)
                       ? static_cast<double>(utf8_length(summary_text(r))) /
                             static_cast<double>(raw_len)
                       : 0.0;
  return r;
}

std::string correlation_id(const ProductInstance& inst, std::size_t index) {
  return inst.instance_id + "#" + std::to_string(index);
}

}  // namespace

SummaryRecord summarize(const ProductInstance& instance, SummarizerKind kind,
                        const SummarizeOptions& options) {
  const std::string& raw = instance.raw_text;
  if (raw == kMissingAsr) return SummaryRecord{{}, {}, SummaryStatus::asr_missing, 0.0};
  if (instance.domain == Domain::P) {
    return finish(SummaryRecord{raw, {}, SummaryStatus::ok, 0.0}, raw);
  }
  switch (kind) {
    case SummarizerKind::llm_remote: {
      if (!options.client) throw UsageError("llm_remote summarizer needs an LLM client");
      const auto ex = options.client->complete(build_prompt(raw, options.demonstrations),
                                               correlation_id(instance, 0));
      return finish(parse_llm_output(ex.completion), raw);
    }
    case SummarizerKind::llm_mock:
      return finish(mock_summarize(raw, options.grammar), raw);
    case SummarizerKind::keyword_baseline:
      return finish(keyword_baseline(raw, options.keyword_k), raw);
    case SummarizerKind::raw_passthrough:
      return finish(SummaryRecord{{}, {raw}, SummaryStatus::ok, 0.0}, raw);
    case SummarizerKind::name_only: {
      auto r = mock_summarize(raw, options.grammar);
      r.features.clear();
      return finish(std::move(r), raw);
    }
    case SummarizerKind::features_only: {
      auto r = mock_summarize(raw, options.grammar);
      r.product_name.clear();
      return finish(std::move(r), raw);
    }
  }
  throw UsageError("unhandled summarizer kind");
}

std::vector<SummaryRecord> summarize_all(const std::vector<ProductInstance>& instances,
                                         SummarizerKind kind, const SummarizeOptions& options,
                                         int max_in_flight, bool degrade_on_failure) {
  std::vector<SummaryRecord> out(instances.size());
  if (kind != SummarizerKind::llm_remote) {
    for (std::size_t i = 0; i < instances.size(); ++i) out[i] = summarize(instances[i], kind, options);
    return out;
  }
  if (!options.client) throw UsageError("llm_remote summarizer needs an LLM client");
  if (max_in_flight < 1) throw UsageError("max_in_flight must be >= 1");

  // Each worker holds at most one request, so the worker count bounds the
  // number in flight.
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;
  auto worker = [&] {
    for (std::size_t i = next++; i < instances.size(); i = next++) {
      const auto& inst = instances[i];
      try {
        if (inst.raw_text == kMissingAsr || inst.domain == Domain::P) {
          out[i] = summarize(inst, kind, options);
          continue;
        }
        const auto ex = options.client->complete(build_prompt(inst.raw_text, options.demonstrations),
                                                 correlation_id(inst, i));
        out[i] = finish(parse_llm_output(ex.completion), inst.raw_text);
      } catch (const LlmTransportError&) {
        if (degrade_on_failure) {
          out[i] = SummaryRecord{{}, {}, SummaryStatus::no_output, 0.0};
          continue;
        }
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  const std::size_t n_workers =
      std::min<std::size_t>(static_cast<std::size_t>(max_in_flight), std::max<std::size_t>(instances.size(), 1));
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
  return out;
}

void save_summaries(const std::vector<std::string>& instance_ids,
                    const std::vector<SummaryRecord>& records,
                    const std::filesystem::path& path) {
  if (instance_ids.size() != records.size()) {
    throw UsageError("save_summaries: id and record counts differ");
  }
  std::ofstream f(path);
  if (!f) throw DataError("cannot write summaries: " + path.string());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    nlohmann::json j = {{"instance_id", instance_ids[i]},
                        {"status", std::string(to_string(r.status))},
                        {"product_name", r.product_name},
                        {"features", r.features},
                        {"signal_level", r.signal_level}};
    f << j.dump() << '\n';
  }
}

SummaryTable load_summaries(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw DataError("missing summaries file: " + path.string());
  SummaryTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = " at line " + std::to_string(line_no);
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (!j.is_object()) throw DataError("malformed summary JSON" + where);
    try {
      SummaryRecord r;
      r.status = parse_summary_status(j.at("status").get<std::string>());
      r.product_name = j.at("product_name").get<std::string>();
      r.features = j.at("features").get<std::vector<std::string>>();
      r.signal_level = j.at("signal_level").get<double>();
      table[j.at("instance_id").get<std::string>()] = std::move(r);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(std::string("bad summary record") + where + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError(std::string(e.what()) + where);
    }
  }
  return table;
}

SummarizerEvaluation evaluate_summarizer(const std::vector<SummarizerSample>& samples) {
  if (samples.empty()) throw UsageError("evaluate_summarizer: no samples");

  struct Acc {
    std::size_t n = 0, recall_n = 0, acc_n = 0;
    double name = 0, recall = 0, acc = 0;
    SummarizerScores scores() const {
      SummarizerScores s;
      s.samples = n;
      s.name_accuracy = n ? name / static_cast<double>(n) : 0.0;
      s.attr_recall = recall_n ? recall / static_cast<double>(recall_n) : 0.0;
      if (acc_n) s.attr_accuracy = acc / static_cast<double>(acc_n);
      return s;
    }
  };
  std::map<Domain, Acc> per;
  Acc all;
  for (const auto& s : samples) {
    const std::set<std::string> extracted(s.record.features.begin(), s.record.features.end());
    const std::set<std::string> truth(s.true_attributes.begin(), s.true_attributes.end());
    std::size_t hit = 0;
    for (const auto& e : extracted) hit += truth.count(e);
    for (Acc* a : {&per[s.domain], &all}) {
      ++a->n;
      a->name += (s.record.product_name == s.true_name) ? 1.0 : 0.0;
      if (!truth.empty()) {
        a->recall += static_cast<double>(hit) / static_cast<double>(truth.size());
        ++a->recall_n;
      }
      if (!extracted.empty()) {
        a->acc += static_cast<double>(hit) / static_cast<double>(extracted.size());
        ++a->acc_n;
      }
    }
  }
  SummarizerEvaluation ev;
  for (const auto& [d, a] : per) ev.per_domain[d] = a.scores();
  ev.overall = all.scores();
  return ev;
}

}  // namespace ampere::textproc
