// Acceptance harness. Prints one PASS/FAIL line per criterion (also written
// to results_<group>.txt in the work directory) and exits
// non-zero when a criterion fails that was not listed with --allow-fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "ampere/cli/cli.hpp"
#include "ampere/core/config.hpp"
#include "ampere/evaluation/evaluation.hpp"
#include "ampere/fusion/fusion.hpp"
#include "ampere/synthgen/synthgen.hpp"
#include "ampere/textproc/summarize.hpp"
#include "ampere/training/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ampere;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Context {
  fs::path work;
  fs::path configs;
};

std::string fmt(double v, int prec = 3) {
  std::ostringstream s;
  s << std::setprecision(prec) << v;
  return s.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

json read_json(const fs::path& p) {
  std::ifstream f(p);
  return json::parse(f);
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

void write_json(const fs::path& p, const json& j) {
  fs::create_directories(p.parent_path());
  std::ofstream(p) << j.dump(2) << '\n';
}

// Runs one CLI command, throwing with its stderr on failure.
void ampere_cmd(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  if (code != cli::kExitOk) throw std::runtime_error(args.front() + " exited " + std::to_string(code) + ": " + err.str());
}

// ---------------------------------------------------------------- metrics

struct Brute {
  double r1 = 0, r5 = 0, r10 = 0, mrr = 0, ndcg = 0;
};

// Rank of every gallery item by pairwise comparison; ties go to the lower index.
Brute brute_force(const std::vector<double>& s, const std::vector<bool>& rel) {
  const std::size_t n = s.size();
  std::vector<std::size_t> rank(n);
  for (std::size_t g = 0; g < n; ++g) {
    std::size_t r = 1;
    for (std::size_t h = 0; h < n; ++h)
      if (s[h] > s[g] || (s[h] == s[g] && h < g)) ++r;
    rank[g] = r;
  }
  Brute b;
  std::size_t best = n + 1, nrel = 0;
  double dcg = 0;
  for (std::size_t g = 0; g < n; ++g) {
    if (!rel[g]) continue;
    ++nrel;
    best = std::min(best, rank[g]);
    if (rank[g] <= 10) dcg += 1.0 / std::log2(double(rank[g]) + 1.0);
  }
  double idcg = 0;
  for (std::size_t i = 1; i <= std::min<std::size_t>(nrel, 10); ++i) idcg += 1.0 / std::log2(double(i) + 1.0);
  b.r1 = best <= 1;
  b.r5 = best <= 5;
  b.r10 = best <= 10;
  b.mrr = 1.0 / double(best);
  b.ndcg = dcg / idcg;
  return b;
}

Outcome metric_oracles(const Context&) {
  const auto t0 = std::chrono::steady_clock::now();
  constexpr int kQueries = 32, kGallery = 64, kDim = 24;
  double worst = 0;
  std::mt19937_64 rng(2024);
  std::normal_distribution<float> normal;
  auto unit = [&] {
    std::vector<float> v(kDim);
    float n = 0;
    for (auto& x : v) {
      x = normal(rng);
      n += x * x;
    }
    for (auto& x : v) x /= std::sqrt(n);
    return v;
  };
  for (int trial = 0; trial < 100; ++trial) {
    // Query i owns 1-3 gallery items; leftover slots hold distractors.
    std::vector<std::string> owners;
    for (int i = 0; i < kQueries; ++i) {
      const int room = kGallery - int(owners.size()) - (kQueries - i - 1);
      const int c = std::min(std::uniform_int_distribution<int>(1, 3)(rng), room);
      for (int k = 0; k < c; ++k) owners.push_back("q" + std::to_string(i));
    }
    while (int(owners.size()) < kGallery) owners.push_back("x" + std::to_string(owners.size()));
    std::shuffle(owners.begin(), owners.end(), rng);

    std::vector<EmbeddingRecord> queries, gallery;
    for (int i = 0; i < kQueries; ++i)
      queries.push_back({"q" + std::to_string(i), "qi" + std::to_string(i), Domain::S, unit()});
    for (int g = 0; g < kGallery; ++g) gallery.push_back({owners[g], "g" + std::to_string(g), Domain::P, unit()});
    // Force exact ties now and then.
    if (trial % 5 == 0) gallery[7].vector = gallery[3].vector;

    const TaskMetrics m = evaluate_task(queries, gallery);
    Brute sum;
    for (int i = 0; i < kQueries; ++i) {
      std::vector<double> s(kGallery);
      std::vector<bool> rel(kGallery);
      for (int g = 0; g < kGallery; ++g) {
        double dot = 0;
        for (int k = 0; k < kDim; ++k) dot += double(queries[i].vector[k]) * double(gallery[g].vector[k]);
        s[g] = dot;
        rel[g] = owners[g] == queries[i].product_id;
      }
      const Brute b = brute_force(s, rel);
      const auto ranking = rank_gallery(s);
      worst = std::max({worst, std::abs(recall_at_k(ranking, rel, 1) - b.r1),
                        std::abs(recall_at_k(ranking, rel, 5) - b.r5),
                        std::abs(recall_at_k(ranking, rel, 10) - b.r10),
                        std::abs(reciprocal_rank(ranking, rel) - b.mrr), std::abs(ndcg_at_10(ranking, rel) - b.ndcg)});
      sum.r1 += b.r1;
      sum.r5 += b.r5;
      sum.r10 += b.r10;
      sum.mrr += b.mrr;
      sum.ndcg += b.ndcg;
    }
    worst = std::max({worst, std::abs(m.r1 - 100.0 * sum.r1 / kQueries) / 100.0,
                      std::abs(m.r5 - 100.0 * sum.r5 / kQueries) / 100.0,
                      std::abs(m.r10 - 100.0 * sum.r10 / kQueries) / 100.0, std::abs(m.mrr - sum.mrr / kQueries),
                      std::abs(m.ndcg10 - sum.ndcg / kQueries)});
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-9 && secs < 10.0,
          "max deviation " + fmt(worst) + " over 100 matrices in " + fmt(secs) + " s (limits 1e-9, 10 s)"};
}

// ---------------------------------------------------------------- gradients

Outcome gradient_check(const Context& ctx) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<std::pair<std::string, std::vector<std::string>>> groups{
      {"encoder", {"visual.", "text."}},
      {"fusion", {"fusion.block.", "fusion.seg", "fusion.xa."}},
      {"projection", {"fusion.proj_", "head."}},
      {"classifier", {"classifier."}},
      {"temperature", {"log_tau"}}};
  double worst = 0;
  std::string detail;
  bool covered = true;
  for (const char* variant : {"ours", "xa_t_as_q", "xa_v_as_q"}) {
    TrainingConfig tc;  // desk dimensions
    tc.model.fusion_variant = parse_fusion_variant(variant);
    tc.seed = 5;
    const fs::path cfg = ctx.work / "gradcheck" / (std::string(variant) + ".json");
    write_json(cfg, json(tc));
    const fs::path out = ctx.work / "gradcheck" / (std::string(variant) + "_report.json");
    fs::remove(out);
    std::ostringstream o, e;
    const int code = cli::run({"gradcheck", "--config", cfg.string(), "--batch", "4", "--samples", "3", "--seed",
                               "11", "--out", out.string()},
                              o, e);
    if (!fs::exists(out)) return {false, std::string(variant) + ": " + e.str()};
    const json r = read_json(out);
    const double err = r["max_rel_error"].get<double>();
    worst = std::max(worst, err);
    std::map<std::string, double> by_group;
    for (const auto& [g, prefixes] : groups)
      for (const auto& [name, v] : r["per_tensor"].items())
        for (const auto& p : prefixes)
          if (name.rfind(p, 0) == 0) by_group[g] = std::max(by_group[g], v.get<double>());
    detail += std::string(variant) + " " + fmt(err) + (code == cli::kExitOk ? "" : " (failed)") + "; ";
    for (const auto& [g, prefixes] : groups)
      if (!by_group.count(g)) {
        covered = false;
        detail += "no " + g + " tensors in " + variant + "; ";
      }
  }
  const double secs = seconds_since(t0);
  return {covered && worst < 1e-4 && secs < 300.0,
          detail + "max " + fmt(worst) + " in " + fmt(secs) + " s (limits 1e-4, 300 s)"};
}

// ---------------------------------------------------------------- losses

Outcome analytic_losses(const Context&) {
  const nn::Matrix eye = nn::Matrix::Identity(2, 2);
  const double pair = info_nce_pair(eye, eye, 1.0);
  const double separated = info_nce_pair(eye, eye, 0.05);
  const double e1 = std::abs(pair - std::log1p(std::exp(-1.0)));
  const double e2 = std::abs(separated);

  // Uniform logits: zero weights and bias over any embeddings.
  double e3 = 0;
  for (int classes : {2, 7, 64}) {
    nn::Matrix e = nn::Matrix::Random(5, 16);
    std::vector<std::int32_t> labels{0, 1, 0, 1, 1};
    const double ce = classification_loss(e, labels, nn::Matrix::Zero(16, classes), nn::Matrix::Zero(1, classes));
    e3 = std::max(e3, std::abs(ce - std::log(double(classes))));
  }
  return {e1 <= 1e-6 && e2 <= 1e-6 && e3 <= 1e-6, "orthonormal B=2 " + fmt(pair, 6) + " (err " + fmt(e1) +
                                                      "), tau 0.05 " + fmt(separated) + ", uniform CE err " + fmt(e3)};
}

// ---------------------------------------------------------------- shapes

struct ShapeCheck {
  bool ok = true;
  double reduction = 0;
  std::string why;
};

ShapeCheck shapes_at(ModelConfig mc) {
  ShapeCheck r;
  synthgen::SynthConfig sc;
  sc.num_products = 2;
  sc.instances_per_domain = 1;
  sc.frame_height = mc.frame_height;
  sc.frame_width = mc.frame_width;
  sc.channels = mc.channels;
  sc.test_fraction = 0;
  sc.seed = 4;
  const auto ds = synthgen::generate(sc);
  std::vector<std::string> texts;
  std::vector<SummaryRecord> sums;
  for (const auto& inst : ds.train) {
    sums.push_back(textproc::summarize(inst, textproc::SummarizerKind::llm_mock));
    texts.push_back(textproc::encoder_text(sums.back()));
  }
  mc.vocab = Vocab::build(texts, 1);
  mc.num_classes = 2;
  Model model = init_model(mc, 3);
  Model identity = model;
  identity.params.at("fusion.seg").value.setZero();
  make_identity_blocks(identity, "fusion.block.");

  auto expect = [&](const nn::Var& v, long rows, long cols, const char* what) {
    if (v.rows() != rows || v.cols() != cols) {
      r.ok = false;
      r.why += std::string(what) + " " + std::to_string(v.rows()) + "x" + std::to_string(v.cols()) + "; ";
    }
  };
  for (std::size_t i = 0; i < ds.train.size(); ++i) {
    const auto& inst = ds.train[i];
    const Domain d = inst.domain;
    for (Model* m : {&model, &identity}) {
      nn::Tape t(false);
      nn::Var z = encode_frames(t, *m, sample_frames(inst, mc.n_frames), d);
      const VisualFeatures vf = temporal_aggregate(t, *m, z, d);
      const TextFeatures tf =
          encode_tokens(t, *m, tokenize(textproc::encoder_text(sums[i]), mc.m_tokens, mc.vocab), d);
      expect(z, mc.n_frames, mc.d_visual, "frames");
      expect(vf.v, 1, mc.d_visual, "v");
      expect(tf.y0, 1, mc.d_text, "y0");
      expect(tf.y, mc.m_tokens, mc.d_text, "y");
      const ProjectedFeatures pf = project_features(t, *m, vf, tf, d);
      expect(pf.visual, mc.n_frames + 1, mc.d_visual, "projected visual");
      expect(pf.text, mc.m_tokens + 1, mc.d_visual, "projected text");
      const nn::Var ours = fuse(t, *m, FusionVariant::ours, pf, d);
      expect(ours, 1, mc.d_embed, "embedding");
      if (std::abs(ours.value().norm() - 1.0) > 1e-9) {
        r.ok = false;
        r.why += "embedding not unit norm; ";
      }
      if (m == &identity) {
        const nn::Var sum = fuse(t, *m, FusionVariant::sum, pf, d);
        r.reduction = std::max(r.reduction, (ours.value() - sum.value()).cwiseAbs().maxCoeff());
      }
    }
  }
  return r;
}

Outcome shape_parity(const Context&) {
  ModelConfig desk;
  ModelConfig full = ModelConfig::full_dims();
  std::string detail;
  bool ok = true;
  for (auto [name, mc] : {std::pair{"desk", desk}, std::pair{"full", full}}) {
    const ShapeCheck s = shapes_at(mc);
    ok = ok && s.ok && s.reduction <= 1e-6;
    detail += std::string(name) + " " + std::to_string(mc.d_visual) + "/" + std::to_string(mc.d_text) + "/" +
              std::to_string(mc.d_embed) + " n=" + std::to_string(mc.n_frames) + " m=" +
              std::to_string(mc.m_tokens) + " blocks=" + std::to_string(mc.fusion_blocks) +
              (s.ok ? " shapes ok" : " " + s.why) + ", identity reduction " + fmt(s.reduction) + "; ";
  }
  detail.resize(detail.size() - 2);
  return {ok, detail};
}

// ---------------------------------------------------------------- summarizers

Outcome summarizer_accuracy(const Context&) {
  synthgen::SynthConfig c;
  c.num_products = 500;
  c.asr_noise_ratio = 0.9;
  c.seed = 21;
  const auto products = synthgen::generate_products(c);
  std::vector<textproc::SummarizerSample> mock, keyword;
  for (std::size_t i = 0; i < products.size(); ++i) {
    auto rng = synthgen::product_stream(c.seed, i, 77);
    const auto& t = products[i].truth;
    const std::string raw = synthgen::inject_asr_noise(t.true_name, t.true_attributes, c, rng);
    mock.push_back({textproc::mock_summarize(raw), t.true_name, t.true_attributes, Domain::S});
    keyword.push_back({textproc::keyword_baseline(raw, 5), t.true_name, t.true_attributes, Domain::S});
  }
  const double m = textproc::evaluate_summarizer(mock).overall.name_accuracy;
  const double k = textproc::evaluate_summarizer(keyword).overall.name_accuracy;
  return {m == 1.0 && k < 0.6, "500 transcripts: mock name accuracy " + fmt(100 * m, 4) + "%, keyword " +
                                   fmt(100 * k, 4) + "% (need 100% and < 60%)"};
}

// ---------------------------------------------------------------- pipelines

json deep_merge(json base, const json& over) {
  for (const auto& [k, v] : over.items())
    base[k] = (v.is_object() && base.contains(k) && base[k].is_object()) ? deep_merge(base[k], v) : v;
  return base;
}

// Generates the corpus once per directory and writes both summary files.
void prepare_corpus(const fs::path& dir, const fs::path& synth_config) {
  if (fs::exists(dir / "raw.jsonl")) return;
  ampere_cmd({"generate", "--config", synth_config.string(), "--out", (dir / "data").string()});
  for (const char* kind : {"llm_mock", "raw"})
    ampere_cmd({"summarize", "--dataset", (dir / "data/train.jsonl").string(), "--dataset",
                (dir / "data/test.jsonl").string(), "--kind", kind, "--out",
                (dir / (std::string(kind == std::string("raw") ? "raw" : "mock") + ".jsonl")).string()});
}

// Trains, embeds the test split and evaluates; returns the report path.
fs::path train_and_evaluate(const fs::path& dir, const std::string& tag, const json& train_config,
                            const std::string& summaries) {
  const fs::path run = dir / tag;
  write_json(run / "config.json", train_config);
  const std::string sums = (dir / (summaries + ".jsonl")).string();
  ampere_cmd({"train", "--quiet", "--config", (run / "config.json").string(), "--dataset",
              (dir / "data/train.jsonl").string(), "--summaries", sums, "--out", run.string()});
  ampere_cmd({"embed", "--checkpoint", (run / "model.ckpt").string(), "--dataset", (dir / "data/test.jsonl").string(),
              "--summaries", sums, "--out", (run / "embeddings.jsonl").string()});
  ampere_cmd({"evaluate", "--embeddings", (run / "embeddings.jsonl").string(), "--summaries", sums, "--report",
              (run / "report.json").string(), "--histogram", (run / "distances.csv").string()});
  return run / "report.json";
}

Outcome determinism(const Context& ctx) {
  const fs::path root = ctx.work / "determinism";
  fs::remove_all(root);
  json train = read_json(ctx.configs / "train_reference.json");
  train["epochs"] = 2;
  train["warmup_epochs"] = 1;
  std::vector<std::string> reports, embeddings;
  for (const char* copy : {"a", "b"}) {
    const fs::path dir = root / copy;
    ampere_cmd({"generate", "--config", (ctx.configs / "synth_reference.json").string(), "--out",
                (dir / "data").string()});
    ampere_cmd({"summarize", "--dataset", (dir / "data/train.jsonl").string(), "--dataset",
                (dir / "data/test.jsonl").string(), "--kind", "llm_mock", "--out", (dir / "mock.jsonl").string()});
    const fs::path report = train_and_evaluate(dir, "run", train, "mock");
    reports.push_back(slurp(report));
    embeddings.push_back(slurp(dir / "run" / "embeddings.jsonl"));
  }
  const bool same = !reports[0].empty() && reports[0] == reports[1] && embeddings[0] == embeddings[1];
  return {same, same ? "two 2-epoch runs gave byte-identical reports and embeddings ("
                           + std::to_string(reports[0].size()) + " report bytes)"
                     : "runs differ"};
}

// The reference runs are shared by the criteria that need trained models.
struct ReferenceRuns {
  std::map<std::string, EvalReport> reports;
  std::map<std::string, double> minutes;
  std::string error;
};

const ReferenceRuns& reference_runs(const Context& ctx) {
  static ReferenceRuns runs = [&] {
    ReferenceRuns r;
    const fs::path dir = ctx.work / "reference";
    try {
      prepare_corpus(dir, ctx.configs / "synth_reference.json");
      const json base = read_json(ctx.configs / "train_reference.json");
      const std::vector<std::tuple<std::string, json, std::string>> plan{
          {"visual_only", deep_merge(base, {{"model", {{"modality", "visual_only"}}}}), "mock"},
          {"summarized", base, "mock"},
          {"raw_asr", base, "raw"},
          {"branch_specific", read_json(ctx.configs / "train_branch.json"), "mock"}};
      for (const auto& [tag, cfg, sums] : plan) {
        const auto t0 = std::chrono::steady_clock::now();
        const fs::path report = train_and_evaluate(dir, tag, cfg, sums);
        r.minutes[tag] = seconds_since(t0) / 60.0;
        r.reports[tag] = report_from_json(read_json(report));
      }
    } catch (const std::exception& e) {
      r.error = e.what();
    }
    return r;
  }();
  return runs;
}

Outcome text_input_ablation(const Context& ctx) {
  const auto& r = reference_runs(ctx);
  if (!r.error.empty()) return {false, r.error};
  const double vis = r.reports.at("visual_only").mr1, mock = r.reports.at("summarized").mr1,
               raw = r.reports.at("raw_asr").mr1;
  double slowest = 0;
  for (const auto& [tag, m] : r.minutes) slowest = std::max(slowest, m);
  const bool a = mock > raw, b = mock >= vis + 5.0, c = std::abs(raw - vis) <= 3.0, d = slowest <= 15.0;
  return {a && b && c && d, "mR1 summarized " + fmt(mock, 4) + ", raw " + fmt(raw, 4) + ", visual-only " +
                                fmt(vis, 4) + "; summarized > raw " + (a ? "yes" : "no") +
                                "; summarized >= visual+5 " + (b ? "yes" : "no") + "; |raw - visual| <= 3 " +
                                (c ? "yes" : "no") + "; slowest run " + fmt(slowest) + " min"};
}

Outcome parameter_sharing(const Context& ctx) {
  const auto& r = reference_runs(ctx);
  if (!r.error.empty()) return {false, r.error};
  const double shared = r.reports.at("summarized").mr1, branch = r.reports.at("branch_specific").mr1;
  return {shared >= branch + 3.0,
          "mR1 shared " + fmt(shared, 4) + " vs branch-specific " + fmt(branch, 4) + " (need gap >= 3)"};
}

Outcome distance_separation(const Context& ctx) {
  const auto& r = reference_runs(ctx);
  if (!r.error.empty()) return {false, r.error};
  const auto& ds = r.reports.at("summarized").distances;
  if (!ds || !ds->intra_mean || !ds->inter_mean) return {false, "no distance statistics"};
  return {*ds->intra_mean < *ds->inter_mean,
          "intra " + fmt(*ds->intra_mean) + " vs inter " + fmt(*ds->inter_mean) + " over " +
              std::to_string(ds->intra_pairs) + "/" + std::to_string(ds->inter_pairs) + " pairs"};
}

Outcome signal_buckets(const Context& ctx) {
  const std::vector<std::string> labels{"0 (LLM No-output)", "(0,0.05)",   "[0.05,0.1)", "[0.1,0.15)",
                                        "[0.15,0.2)",        "[0.2,0.25)", "≥0.25"};
  bool ok = std::equal(labels.begin(), labels.end(), textproc::kSignalBuckets.begin(),
                       textproc::kSignalBuckets.end());
  const std::vector<std::pair<double, std::size_t>> edges{
      {0.0, 0},  {1e-9, 1}, {0.0499, 1}, {0.05, 2}, {0.0999, 2}, {0.1, 3},
      {0.1499, 3}, {0.15, 4}, {0.1999, 4}, {0.2, 5}, {0.2499, 5}, {0.25, 6}, {1.0, 6}};
  for (const auto& [level, bucket] : edges) ok = ok && textproc::signal_bucket_index(level) == bucket;
  std::string detail = ok ? "labels and edges match; " : "label or edge mismatch; ";

  const auto& r = reference_runs(ctx);
  if (!r.error.empty()) return {false, detail + r.error};
  const EvalReport& rep = r.reports.at("summarized");
  if (rep.signal.empty()) return {false, detail + "no signal tables"};
  std::size_t zero_queries = 0;
  bool zero_evaluated = true;
  for (const auto& [task, rows] : rep.signal) {
    double total = 0;
    for (const auto& row : rows) total += row.percentage;
    ok = ok && rows.size() == labels.size() && std::abs(total - 100.0) <= 0.1;
    for (std::size_t i = 0; i < rows.size(); ++i) ok = ok && rows[i].bucket == labels[i];
    zero_queries += rows.front().queries;
    zero_evaluated = zero_evaluated && (rows.front().queries == 0 || rows.front().r1.has_value());
    detail += std::string(to_string(task)) + " sums to " + fmt(total, 6) + ", ";
  }
  ok = ok && zero_queries > 0 && zero_evaluated;
  return {ok, detail + std::to_string(zero_queries) + " zero-signal queries evaluated"};
}

struct Criterion {
  std::string name;
  std::string group;
  std::function<Outcome(const Context&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::string group = "all";
  std::string work = "acceptance_work";
  std::string configs;
  std::vector<std::string> allow_fail;
  app.add_option("--group", group, "fast|training|all");
  app.add_option("--work", work, "scratch directory");
  app.add_option("--configs", configs, "reference config directory")->required();
  app.add_option("--allow-fail", allow_fail, "criteria whose failure does not fail the run");
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria{
      {"metric_oracles", "fast", metric_oracles},
      {"gradient_check", "fast", gradient_check},
      {"analytic_losses", "fast", analytic_losses},
      {"shape_parity", "fast", shape_parity},
      {"text_input_ablation", "training", text_input_ablation},
      {"parameter_sharing", "training", parameter_sharing},
      {"summarizer_accuracy", "fast", summarizer_accuracy},
      {"distance_separation", "training", distance_separation},
      {"signal_buckets", "training", signal_buckets},
      {"determinism", "fast", determinism},
  };
  const Context ctx{fs::absolute(work), fs::absolute(configs)};
  fs::create_directories(ctx.work);
  const std::set<std::string> tolerated(allow_fail.begin(), allow_fail.end());

  std::ofstream summary(ctx.work / ("results_" + group + ".txt"));
  int hard_failures = 0;
  for (const auto& c : criteria) {
    if (group != "all" && c.group != group) continue;
    Outcome o;
    try {
      o = c.run(ctx);
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const std::string line = (o.pass ? "PASS " : "FAIL ") + c.name + ": " + o.detail;
    std::cout << line << std::endl;
    summary << line << '\n';
    if (!o.pass && !tolerated.count(c.name)) ++hard_failures;
  }
  return hard_failures == 0 ? 0 : 1;
}
