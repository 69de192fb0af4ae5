#include "ampere/cli/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "ampere/core/dataset.hpp"
#include "ampere/core/embeddings.hpp"
#include "ampere/core/error.hpp"
#include "ampere/evaluation/evaluation.hpp"
#include "ampere/fusion/fusion.hpp"
#include "ampere/synthgen/synthgen.hpp"
#include "ampere/textproc/summarize.hpp"
#include "ampere/training/training.hpp"

namespace ampere::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void require_file(const fs::path& p) {
  if (!fs::is_regular_file(p)) throw DataError("input file not found: " + p.string());
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

void write_text(const fs::path& p, const std::string& text) {
  ensure_parent(p);
  std::ofstream f(p, std::ios::binary);
  if (!f) throw DataError("cannot write " + p.string());
  f << text;
}

json read_json(const fs::path& p) {
  require_file(p);
  std::ifstream f(p);
  json j = json::parse(f, nullptr, false);
  if (j.is_discarded()) throw DataError("malformed JSON: " + p.string());
  return j;
}

std::vector<ProductInstance> load_all(const std::vector<std::string>& manifests) {
  std::vector<ProductInstance> all;
  for (const auto& m : manifests) {
    require_file(m);
    auto part = load_dataset(m);
    std::move(part.begin(), part.end(), std::back_inserter(all));
  }
  return all;
}

struct GenerateArgs {
  std::string config, out;
  int threads = 1;
};

int cmd_generate(const GenerateArgs& a, std::ostream& out) {
  const auto config = synthgen::load_synth_config((require_file(a.config), a.config));
  const auto ds = synthgen::generate_dataset(config, a.out, a.threads);
  out << "generated " << ds.truth.size() << " products: " << ds.train.size() << " train and "
      << ds.test.size() << " test instances in " << a.out << '\n';
  return kExitOk;
}

struct SummarizeArgs {
  std::vector<std::string> datasets;
  std::string kind, out, ground_truth;
  int max_in_flight = 4;
  int keyword_k = 5;
  bool strict = false;
};

int cmd_summarize(const SummarizeArgs& a, std::ostream& out) {
  const auto kind = textproc::parse_summarizer_kind(a.kind);
  if (a.max_in_flight < 1) throw UsageError("--max-in-flight must be >= 1");
  const auto instances = load_all(a.datasets);
  std::vector<synthgen::ProductTruth> truth;
  if (!a.ground_truth.empty()) truth = synthgen::load_ground_truth((require_file(a.ground_truth), a.ground_truth));

  textproc::SummarizeOptions opt;
  opt.keyword_k = a.keyword_k;
  std::unique_ptr<textproc::HttpLlmClient> client;
  if (kind == textproc::SummarizerKind::llm_remote) {
    auto endpoint = textproc::LlmEndpoint::from_env();
    if (!endpoint) throw UsageError("llm_remote needs AMPERE_LLM_ENDPOINT");
    client = std::make_unique<textproc::HttpLlmClient>(*endpoint);
    opt.client = client.get();
  }
  const auto records = textproc::summarize_all(instances, kind, opt, a.max_in_flight, !a.strict);

  std::vector<std::string> ids;
  for (const auto& i : instances) ids.push_back(i.instance_id);
  {
    auto sorted = ids;
    std::sort(sorted.begin(), sorted.end());
    if (auto dup = std::adjacent_find(sorted.begin(), sorted.end()); dup != sorted.end())
      throw DataError("duplicate instance id across datasets: " + *dup);
  }
  ensure_parent(a.out);
  textproc::save_summaries(ids, records, a.out);

  std::size_t ok = 0, no_output = 0, missing = 0;
  for (const auto& r : records) {
    ok += r.status == SummaryStatus::ok;
    no_output += r.status == SummaryStatus::no_output;
    missing += r.status == SummaryStatus::asr_missing;
  }
  out << "summarized " << records.size() << " instances (" << ok << " ok, " << no_output << " no output, "
      << missing << " missing ASR) -> " << a.out << '\n';

  if (!truth.empty()) {
    std::map<std::string, const synthgen::ProductTruth*> by_product;
    for (const auto& t : truth) by_product[t.product_id] = &t;
    std::vector<textproc::SummarizerSample> samples;
    for (std::size_t i = 0; i < instances.size(); ++i) {
      if (instances[i].domain == Domain::P) continue;
      auto it = by_product.find(instances[i].product_id);
      if (it == by_product.end()) throw DataError("no ground truth for " + instances[i].product_id);
      samples.push_back({records[i], it->second->true_name, it->second->true_attributes, instances[i].domain});
    }
    if (!samples.empty()) {
      const auto ev = textproc::evaluate_summarizer(samples);
      auto line = [&out](const std::string& label, const textproc::SummarizerScores& s) {
        out << std::left << std::setw(8) << label << std::right << std::fixed << std::setprecision(1)
            << " name " << std::setw(5) << 100 * s.name_accuracy << "  attr recall " << std::setw(5)
            << 100 * s.attr_recall << "  attr accuracy ";
        if (s.attr_accuracy) out << std::setw(5) << 100 * *s.attr_accuracy; else out << "  n/a";
        out << "  (" << s.samples << ")\n";
      };
      for (const auto& [d, s] : ev.per_domain) line(std::string(to_string(d)), s);
      line("overall", ev.overall);
    }
  }
  return kExitOk;
}

struct TrainArgs {
  std::string config, out;
  std::vector<std::string> datasets;
  std::string summaries;
  bool quiet = false;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
  const auto config = load_training_config((require_file(a.config), a.config));
  const auto instances = load_all(a.datasets);
  const auto summaries = textproc::load_summaries((require_file(a.summaries), a.summaries));
  const fs::path dir = a.out;
  fs::create_directories(dir);

  TrainOptions opt;
  opt.checkpoint_dir = dir / "checkpoints";
  if (config.checkpoint_every > 0) fs::create_directories(opt.checkpoint_dir);
  if (!a.quiet)
    opt.on_epoch = [&out](const EpochLog& e) {
      out << "epoch " << e.epoch << " loss " << std::fixed << std::setprecision(4) << e.loss.total << " tau "
          << e.loss.temperature << '\n'
          << std::flush;
    };
  const TrainResult result = train(instances, summaries, config, opt);
  save_checkpoint(result.model, dir / "model.ckpt");
  write_loss_log(result.log, dir / "loss.csv");
  write_text(dir / "labels.json", json(result.labels).dump(1) + "\n");
  out << "trained on " << result.labels.size() << " products (" << result.skipped_products
      << " skipped) -> " << (dir / "model.ckpt").string() << '\n';
  return kExitOk;
}

struct EmbedArgs {
  std::string checkpoint, summaries, out;
  std::vector<std::string> datasets;
};

int cmd_embed(const EmbedArgs& a, std::ostream& out) {
  const Model model = load_checkpoint((require_file(a.checkpoint), a.checkpoint));
  const auto instances = load_all(a.datasets);
  const auto summaries = textproc::load_summaries((require_file(a.summaries), a.summaries));
  const auto records = embed_all(model, instances, summaries);
  ensure_parent(a.out);
  save_embeddings(records, a.out);
  out << "embedded " << records.size() << " instances -> " << a.out << '\n';
  return kExitOk;
}

struct EvaluateArgs {
  std::string embeddings, summaries, report, histogram, tasks;
  bool no_distances = false;
  std::size_t pair_cap = 1'000'000;
  std::uint64_t seed = 0;
};

std::vector<Task> parse_tasks(const std::string& list) {
  std::vector<Task> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(parse_task(item));
  if (out.empty()) throw UsageError("--tasks selects no task");
  return out;
}

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
  EvalOptions opt;
  if (!a.tasks.empty()) opt.tasks = parse_tasks(a.tasks);
  opt.distances = !a.no_distances;
  opt.pair_cap = a.pair_cap;
  opt.seed = a.seed;
  const auto records = load_embeddings((require_file(a.embeddings), a.embeddings));
  textproc::SummaryTable summaries;
  if (!a.summaries.empty()) {
    summaries = textproc::load_summaries((require_file(a.summaries), a.summaries));
    opt.summaries = &summaries;
  }
  const EvalReport report = evaluate_all(records, opt);
  write_text(a.report, report_json(report).dump(1) + "\n");
  if (!a.histogram.empty() && report.distances) {
    ensure_parent(a.histogram);
    write_histogram_csv(*report.distances, a.histogram);
  }
  out << report_text(report);
  return kExitOk;
}

struct ReportArgs {
  std::string report, format = "text", out;
};

int cmd_report(const ReportArgs& a, std::ostream& out) {
  const EvalReport report = report_from_json(read_json(a.report));
  std::string text;
  if (a.format == "json") text = report_json(report).dump(1) + "\n";
  else if (a.format == "text") text = report_text(report);
  else if (a.format == "csv") text = report_csv(report);
  else throw UsageError("--format must be json, text or csv");
  if (a.out.empty()) out << text;
  else write_text(a.out, text);
  return kExitOk;
}

struct GradcheckArgs {
  std::string config, out;
  int batch = 4;
  int samples = 200;
  std::uint64_t seed = 0;
  double threshold = 1e-4;
};

int cmd_gradcheck(const GradcheckArgs& a, std::ostream& out) {
  if (a.batch < 2) throw UsageError("--batch must be >= 2");
  TrainingConfig config = load_training_config((require_file(a.config), a.config));
  ModelConfig& mc = config.model;

  // A small synthetic batch shaped for the model.
  synthgen::SynthConfig sc;
  sc.num_products = a.batch;
  sc.instances_per_domain = 1;
  sc.frame_height = mc.frame_height;
  sc.frame_width = mc.frame_width;
  sc.channels = mc.channels;
  sc.test_fraction = 0;
  sc.seed = a.seed;
  const auto ds = synthgen::generate(sc);
  std::vector<SummaryRecord> summaries;
  summaries.reserve(ds.train.size());
  for (const auto& inst : ds.train) summaries.push_back(textproc::summarize(inst, textproc::SummarizerKind::llm_mock));
  if (mc.vocab.size() <= 3 && mc.modality != Modality::visual_only) {
    std::vector<std::string> texts;
    for (const auto& s : summaries) texts.push_back(textproc::encoder_text(s));
    mc.vocab = Vocab::build(texts, 1);
  }
  mc.num_classes = std::max(mc.num_classes, a.batch);
  Model model = init_model(mc, config.seed);

  BatchTriplet batch(static_cast<std::size_t>(a.batch));
  std::map<std::string, std::int32_t> label;
  for (std::size_t i = 0; i < ds.train.size(); ++i) {
    const auto& inst = ds.train[i];
    const auto k = label.emplace(inst.product_id, std::int32_t(label.size())).first->second;
    auto& item = batch[static_cast<std::size_t>(k)];
    item.label = k;
    item.instance[static_cast<std::size_t>(inst.domain)] = &inst;
    item.summary[static_cast<std::size_t>(inst.domain)] = &summaries[i];
  }
  for (Domain d : config.excluded_domains)
    for (auto& item : batch) {
      item.instance[static_cast<std::size_t>(d)] = nullptr;
      item.summary[static_cast<std::size_t>(d)] = nullptr;
    }

  const auto report = grad_check(model, batch, config.excluded_domains, 1e-5, a.samples, a.seed);
  const json j = {{"max_rel_error", report.max_rel_error},
                  {"entries", report.entries},
                  {"threshold", a.threshold},
                  {"passed", report.max_rel_error < a.threshold},
                  {"per_tensor", report.per_tensor}};
  if (!a.out.empty()) write_text(a.out, j.dump(1) + "\n");
  out << "checked " << report.entries << " entries over " << report.per_tensor.size()
      << " tensors; max relative error " << std::scientific << std::setprecision(3) << report.max_rel_error
      << '\n';
  if (report.max_rel_error >= a.threshold) {
    for (const auto& [name, err] : report.per_tensor)
      if (err >= a.threshold) out << "  " << name << ' ' << err << '\n';
    throw DataError("gradient check failed");
  }
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cross-domain product retrieval toolkit", "ampere"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Write a synthetic tri-domain corpus");
  g->add_option("--config", gen.config, "synthetic corpus config (JSON)")->required();
  g->add_option("--out", gen.out, "output directory")->required();
  g->add_option("--threads", gen.threads, "worker threads");

  SummarizeArgs sum;
  auto* s = app.add_subcommand("summarize", "Summarize instance texts");
  s->add_option("--dataset", sum.datasets, "dataset manifest (repeatable)")->required();
  s->add_option("--kind", sum.kind, "llm_remote|llm_mock|keyword|raw|name_only|features_only")->required();
  s->add_option("--out", sum.out, "summaries file (JSONL)")->required();
  s->add_option("--max-in-flight", sum.max_in_flight, "concurrent remote requests");
  s->add_option("--keyword-k", sum.keyword_k, "keywords kept by the keyword summarizer");
  s->add_option("--ground-truth", sum.ground_truth, "ground-truth file; prints summarizer accuracy");
  s->add_flag("--strict", sum.strict, "fail on remote errors instead of recording no output");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a model");
  t->add_option("--config", tr.config, "training config (JSON)")->required();
  t->add_option("--dataset", tr.datasets, "dataset manifest (repeatable)")->required();
  t->add_option("--summaries", tr.summaries, "summaries file")->required();
  t->add_option("--out", tr.out, "output directory")->required();
  t->add_flag("--quiet", tr.quiet, "no per-epoch lines");

  EmbedArgs em;
  auto* e = app.add_subcommand("embed", "Embed instances with a trained model");
  e->add_option("--checkpoint", em.checkpoint, "model checkpoint")->required();
  e->add_option("--dataset", em.datasets, "dataset manifest (repeatable)")->required();
  e->add_option("--summaries", em.summaries, "summaries file")->required();
  e->add_option("--out", em.out, "embeddings file (JSONL)")->required();

  EvaluateArgs ev;
  auto* v = app.add_subcommand("evaluate", "Cross-domain retrieval metrics");
  v->add_option("--embeddings", ev.embeddings, "embeddings file")->required();
  v->add_option("--summaries", ev.summaries, "summaries file; enables signal-level tables");
  v->add_option("--report", ev.report, "report output (JSON)")->required();
  v->add_option("--tasks", ev.tasks, "comma-separated subset of P2S,P2L,S2P,S2L,L2P,L2S");
  v->add_option("--histogram", ev.histogram, "distance histogram CSV");
  v->add_option("--pair-cap", ev.pair_cap, "inter-product pair budget");
  v->add_option("--seed", ev.seed, "pair sampling seed");
  v->add_flag("--no-distances", ev.no_distances, "skip distance statistics");

  ReportArgs rp;
  auto* r = app.add_subcommand("report", "Render a saved report");
  r->add_option("--report", rp.report, "report file (JSON)")->required();
  r->add_option("--format", rp.format, "json|text|csv");
  r->add_option("--out", rp.out, "output file (default stdout)");

  GradcheckArgs gc;
  auto* c = app.add_subcommand("gradcheck", "Finite-difference gradient check");
  c->add_option("--config", gc.config, "training config (JSON)")->required();
  c->add_option("--batch", gc.batch, "products in the batch");
  c->add_option("--samples", gc.samples, "entries checked per tensor");
  c->add_option("--seed", gc.seed, "data and sampling seed");
  c->add_option("--threshold", gc.threshold, "maximum relative error");
  c->add_option("--out", gc.out, "report output (JSON)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& ex) {
    err << "error: " << ex.what() << "\n\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return kExitUsage;
  }

  try {
    if (*g) return cmd_generate(gen, out);
    if (*s) return cmd_summarize(sum, out);
    if (*t) return cmd_train(tr, out);
    if (*e) return cmd_embed(em, out);
    if (*v) return cmd_evaluate(ev, out);
    if (*r) return cmd_report(rp, out);
    if (*c) return cmd_gradcheck(gc, out);
  } catch (const UsageError& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitUsage;
  } catch (const DataError& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitData;
  } catch (const fs::filesystem_error& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitData;
  } catch (const nlohmann::json::exception& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace ampere::cli
