#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ampere/cli/cli.hpp"
#include "ampere/core/embeddings.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ampere;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result call(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("ampere_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

// Every domain of product k embeds to the k-th basis vector.
fs::path perfect_copy(const fs::path& dir, int products, int per_domain) {
  std::vector<EmbeddingRecord> recs;
  for (int k = 0; k < products; ++k)
    for (Domain d : kAllDomains)
      for (int i = 0; i < per_domain; ++i) {
        EmbeddingRecord r;
        r.product_id = "p" + std::to_string(k);
        r.instance_id = r.product_id + "_" + std::string(to_string(d)) + std::to_string(i);
        r.domain = d;
        r.vector.assign(products, 0.0f);
        r.vector[k] = 1.0f;
        recs.push_back(r);
      }
  const auto p = dir / "emb.jsonl";
  save_embeddings(recs, p);
  return p;
}

}  // namespace

TEST_CASE("no arguments is a usage error") {
  auto r = call({});
  CHECK(r.code == cli::kExitUsage);
  CHECK(r.err.find("generate") != std::string::npos);
}

TEST_CASE("help exits cleanly") {
  auto r = call({"--help"});
  CHECK(r.code == cli::kExitOk);
  CHECK(r.out.find("evaluate") != std::string::npos);
}

TEST_CASE("unknown flags and bad values are usage errors") {
  CHECK(call({"evaluate", "--embeddings", "x", "--report", "y", "--bogus"}).code == cli::kExitUsage);
  CHECK(call({"summarize", "--dataset", "x", "--out", "y"}).code == cli::kExitUsage);
  const auto dir = scratch("usage");
  const auto emb = perfect_copy(dir, 4, 1);
  CHECK(call({"evaluate", "--embeddings", emb.string(), "--report", (dir / "r.json").string(), "--tasks", "P2X"})
            .code == cli::kExitUsage);
}

TEST_CASE("missing input files exit with the data code and name the path") {
  const auto dir = scratch("missing");
  const auto gone = (dir / "nothing_here.jsonl").string();
  auto r = call({"evaluate", "--embeddings", gone, "--report", (dir / "r.json").string()});
  CHECK(r.code == cli::kExitData);
  CHECK(r.err.find("nothing_here.jsonl") != std::string::npos);
  CHECK(call({"report", "--report", gone}).code == cli::kExitData);
  CHECK(call({"generate", "--config", gone, "--out", (dir / "d").string()}).code == cli::kExitData);
}

TEST_CASE("perfect copies retrieve perfectly on every task") {
  const auto dir = scratch("perfect");
  const auto emb = perfect_copy(dir, 6, 2);
  const auto report = dir / "report.json";
  auto r = call({"evaluate", "--embeddings", emb.string(), "--report", report.string()});
  REQUIRE(r.code == cli::kExitOk);
  const auto j = json::parse(slurp(report));
  REQUIRE(j["tasks"].size() == 6);
  for (const auto& [task, m] : j["tasks"].items()) {
    CAPTURE(task);
    CHECK(m["R1"].get<double>() == 100.0);
    CHECK(m["MRR"].get<double>() == doctest::Approx(1.0));
  }
  CHECK(j["mR1"].get<double>() == 100.0);
  CHECK(j["distance_stats"]["intra_mean"].get<double>() == doctest::Approx(0.0));
  CHECK(j["distance_stats"]["inter_mean"].get<double>() == doctest::Approx(1.0));
}

TEST_CASE("report renders all three formats") {
  const auto dir = scratch("formats");
  const auto emb = perfect_copy(dir, 5, 1);
  const auto report = (dir / "report.json").string();
  REQUIRE(call({"evaluate", "--embeddings", emb.string(), "--report", report, "--tasks", "P2S,S2L"}).code ==
          cli::kExitOk);

  auto csv = call({"report", "--report", report, "--format", "csv"});
  REQUIRE(csv.code == cli::kExitOk);
  CHECK(csv.out.rfind("task,R1,R5,R10,MRR,NDCG10,queries,excluded", 0) == 0);
  CHECK(std::count(csv.out.begin(), csv.out.end(), '\n') == 3);

  auto text = call({"report", "--report", report, "--format", "text"});
  CHECK(text.code == cli::kExitOk);
  CHECK(text.out.find("S2L") != std::string::npos);
  CHECK(text.out.find("P2L") == std::string::npos);

  const auto copy = dir / "copy.json";
  CHECK(call({"report", "--report", report, "--format", "json", "--out", copy.string()}).code == cli::kExitOk);
  CHECK(json::parse(slurp(copy)) == json::parse(slurp(report)));

  CHECK(call({"report", "--report", report, "--format", "xml"}).code == cli::kExitUsage);
}

TEST_CASE("malformed report input is a data error") {
  const auto dir = scratch("malformed");
  std::ofstream(dir / "bad.json") << "{not json";
  CHECK(call({"report", "--report", (dir / "bad.json").string()}).code == cli::kExitData);
}

TEST_CASE("generate, summarize, train, embed and evaluate chain together") {
  const auto dir = scratch("pipeline");
  json synth = {{"num_products", 8},   {"instances_per_domain", 1}, {"frame_shape", {8, 8, 3}},
                {"short_frames", 4},   {"live_frames", 6},          {"test_fraction", 0.5},
                {"seed", 3}};
  std::ofstream(dir / "synth.json") << synth.dump();
  json train = {{"model",
                 {{"n_frames", 2},     {"m_tokens", 8},     {"d_visual", 8},      {"d_text", 8},
                  {"d_embed", 4},      {"fusion_blocks", 1}, {"text_layers", 1},  {"temporal_blocks", 1},
                  {"frame_layers", 1}, {"heads", 2},         {"frame_height", 8}, {"frame_width", 8},
                  {"patch_size", 4}}},
                {"epochs", 1},
                {"warmup_epochs", 0},
                {"batch_size", 2},
                {"seed", 1}};
  std::ofstream(dir / "train.json") << train.dump();
  const auto d = [&](const char* f) { return (dir / f).string(); };

  REQUIRE(call({"generate", "--config", d("synth.json"), "--out", d("data")}).code == cli::kExitOk);
  auto s = call({"summarize", "--dataset", d("data/train.jsonl"), "--dataset", d("data/test.jsonl"), "--kind",
                 "llm_mock", "--out", d("sum.jsonl"), "--ground-truth", d("data/ground_truth.jsonl")});
  REQUIRE(s.code == cli::kExitOk);
  REQUIRE(call({"train", "--quiet", "--config", d("train.json"), "--dataset", d("data/train.jsonl"),
                "--summaries", d("sum.jsonl"), "--out", d("run")})
              .code == cli::kExitOk);
  CHECK(fs::exists(dir / "run" / "model.ckpt"));
  CHECK(fs::exists(dir / "run" / "loss.csv"));
  REQUIRE(call({"embed", "--checkpoint", d("run/model.ckpt"), "--dataset", d("data/test.jsonl"), "--summaries",
                d("sum.jsonl"), "--out", d("emb.jsonl")})
              .code == cli::kExitOk);
  const auto emb = load_embeddings(dir / "emb.jsonl");
  CHECK(emb.size() == 12);
  auto e = call({"evaluate", "--embeddings", d("emb.jsonl"), "--summaries", d("sum.jsonl"), "--report",
                 d("report.json")});
  REQUIRE(e.code == cli::kExitOk);
  CHECK(e.out.find("mR1") != std::string::npos);
  const auto j = json::parse(slurp(dir / "report.json"));
  CHECK(j["tasks"].size() == 6);
  CHECK(j.contains("signal_table"));

  // A checkpoint is not a dataset.
  CHECK(call({"embed", "--checkpoint", d("run/model.ckpt"), "--dataset", d("run/model.ckpt"), "--summaries",
              d("sum.jsonl"), "--out", d("x.jsonl")})
            .code == cli::kExitData);
}
