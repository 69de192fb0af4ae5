#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ampere/fusion/fusion.hpp"
#include "ampere/training/training.hpp"
#include "doctest.h"
#include "model_fixtures.hpp"
#include "toy_data.hpp"

using namespace ampere;
using namespace ampere::nn;
using namespace ampere::testing;

namespace {

Matrix unit_rows(Matrix m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) m.row(i).normalize();
  return m;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

TrainingConfig toy_training(int epochs) {
  TrainingConfig tc;
  tc.model = tiny_config();
  tc.model.vocab = Vocab();
  tc.epochs = epochs;
  tc.warmup_epochs = 1;
  tc.batch_size = 4;
  tc.peak_lr = {1e-3, 1e-3, 1e-3, 1e-3};
  tc.seed = 17;
  return tc;
}

BatchTriplet batch_of(const ToySet& set, const std::vector<int>& products) {
  BatchTriplet b;
  for (std::size_t k = 0; k < products.size(); ++k) {
    TripletItem item;
    item.label = static_cast<std::int32_t>(k);
    for (Domain d : kAllDomains) {
      const auto& inst = set.instances[static_cast<std::size_t>(products[k]) * 3 + static_cast<std::size_t>(d)];
      item.instance[static_cast<std::size_t>(d)] = &inst;
      item.summary[static_cast<std::size_t>(d)] = &set.summaries.at(inst.instance_id);
    }
    b.push_back(item);
  }
  return b;
}

}  // namespace

TEST_CASE("InfoNCE closed forms") {
  const Matrix eye = Matrix::Identity(2, 2);
  CHECK(info_nce_pair(eye, eye, 1.0) == doctest::Approx(std::log(1.0 + std::exp(-1.0))).epsilon(1e-12));
  CHECK(info_nce_pair(eye, eye, 1.0) == doctest::Approx(0.3133).epsilon(1e-4));

  Matrix a(2, 2), b(2, 2);
  a << 1, 0, -1, 0;
  b = a;  // diag similarity 1, off-diagonal -1
  CHECK(std::abs(info_nce_pair(a, b, 0.05) - std::log1p(std::exp(-40.0))) < 1e-12);
  CHECK(info_nce_pair(a, b, 0.05) < 1e-12);

  std::mt19937_64 rng(1);
  const Matrix x = unit_rows(random_matrix(5, 4, rng));
  const Matrix y = unit_rows(random_matrix(5, 4, rng));
  CHECK(info_nce_pair(x, y, 0.07) == doctest::Approx(info_nce_pair(y, x, 0.07)).epsilon(1e-14));

  CHECK_THROWS_AS(info_nce_pair(x, y, 0.0), UsageError);
  CHECK_THROWS_AS(info_nce_pair(x, y, -1.0), UsageError);
  CHECK_THROWS_AS(info_nce_pair(2.0 * x, y, 0.1), UsageError);
  CHECK_THROWS_AS(info_nce_pair(x.topRows(1), y.topRows(1), 0.1), UsageError);
}

TEST_CASE("InfoNCE falls as matched similarity rises") {
  // Rows (cos t, sin t) against (1, 0): off-diagonal pairs use an orthogonal
  // second axis so they stay fixed.
  double prev = 1e9;
  for (double s = -0.9; s <= 1.0; s += 0.1) {
    Matrix a(2, 3), b(2, 3);
    const double c = std::sqrt(1 - s * s);
    a << 1, 0, 0, 0, 1, 0;
    b << s, 0, c, 0, s, c;
    // off-diagonals: a0.b1 = 0, a1.b0 = 0 for every s
    const double l = info_nce_pair(a, b, 0.1);
    CHECK(l < prev);
    prev = l;
  }
}

TEST_CASE("classification loss") {
  const int C = 3;
  Matrix e = Matrix::Identity(C, C);
  CHECK(classification_loss(e, {0, 1, 2}, 20.0 * Matrix::Identity(C, C), Matrix::Zero(1, C)) < 1e-8);
  CHECK(classification_loss(e, {0, 1, 2}, Matrix::Zero(C, C), Matrix::Zero(1, C)) ==
        doctest::Approx(std::log(3.0)).epsilon(1e-15));

  std::mt19937_64 rng(4);
  const Matrix E = unit_rows(random_matrix(6, 5, rng));
  const Matrix W = random_matrix(5, 4, rng, 2.0);
  const Matrix bias = random_matrix(1, 4, rng);
  const std::vector<std::int32_t> labels = {0, 3, 2, 1, 1, 0};
  double direct = 0;
  for (int i = 0; i < 6; ++i) {
    Eigen::RowVectorXd logits = E.row(i) * W + bias;
    double z = 0;
    for (int k = 0; k < 4; ++k) z += std::exp(logits(k));
    direct += std::log(z) - logits(labels[i]);
  }
  direct /= 6;
  CHECK(std::abs(classification_loss(E, labels, W, bias) - direct) < 1e-10);
  CHECK_THROWS_AS(classification_loss(E, {0, 4, 2, 1, 1, 0}, W, bias), UsageError);
  CHECK_THROWS_AS(classification_loss(E, {0, -1, 2, 1, 1, 0}, W, bias), UsageError);
}

TEST_CASE("combined loss term accounting") {
  auto c = tiny_config();
  c.num_classes = 4;
  const auto set = make_toy_set(c, 4, 3);
  Model model = init_model(c, 5);
  jitter(model, 6);
  const auto batch = batch_of(set, {0, 1, 2, 3});

  const auto all = combined_loss(model, batch, {});
  CHECK(all.contrastive.size() == 3);
  CHECK(all.classification.size() == 3);
  double sum = 0;
  for (const auto& [k, v] : all.contrastive) sum += v;
  for (const auto& [k, v] : all.classification) sum += v;
  CHECK(std::abs(all.total - sum) < 1e-12);
  CHECK(all.temperature == doctest::Approx(std::exp(model.params.at("log_tau").value(0, 0))));

  const auto no_l = combined_loss(model, batch, {Domain::L});
  REQUIRE(no_l.contrastive.size() == 1);
  REQUIRE(no_l.classification.size() == 2);
  CHECK(no_l.contrastive.count("PS") == 1);
  CHECK(no_l.classification.count(Domain::L) == 0);
  CHECK(std::abs(no_l.total - (no_l.contrastive.at("PS") + no_l.classification.at(Domain::P) +
                               no_l.classification.at(Domain::S))) < 1e-12);
  // Excluding L leaves the P and S terms untouched.
  CHECK(no_l.contrastive.at("PS") == doctest::Approx(all.contrastive.at("PS")).epsilon(1e-14));

  for (Domain d : kAllDomains) {
    const auto l = combined_loss(model, batch, {d});
    std::size_t mentions = 0;
    for (const auto& [k, v] : l.contrastive) mentions += k.find(std::string(to_string(d))) != std::string::npos;
    CHECK(mentions == 0);
    CHECK(l.contrastive.size() + l.classification.size() == 3);
  }
  CHECK_THROWS_AS(combined_loss(model, batch, {Domain::P, Domain::S}), UsageError);
  CHECK_THROWS_AS(combined_loss(model, batch_of(set, {0}), {}), UsageError);
}

TEST_CASE("combined loss hits the InfoNCE floor for domain-identical embeddings") {
  auto c = tiny_config();
  c.num_classes = 2;
  auto set = make_toy_set(c, 2, 8);
  // Same payload in every domain of a product.
  for (int p = 0; p < 2; ++p) {
    for (int d = 1; d < 3; ++d) {
      set.instances[p * 3 + d].frames = set.instances[p * 3].frames;
      set.summaries[set.instances[p * 3 + d].instance_id] = set.summaries[set.instances[p * 3].instance_id];
    }
  }
  Model model = init_model(c, 9);
  jitter(model, 10, 0.5);
  const auto batch = batch_of(set, {0, 1});
  const auto e0 = embed_instance(model, set.instances[0], set.summaries.at(set.instances[0].instance_id));
  const auto e1 = embed_instance(model, set.instances[3], set.summaries.at(set.instances[3].instance_id));
  double s = 0;
  for (std::size_t k = 0; k < e0.size(); ++k) s += static_cast<double>(e0[k]) * e1[k];
  REQUIRE(s < 0.95);

  // Perfect classifier: class k scores 1000 * <e, e_k>.
  for (int k = 0; k < 2; ++k) {
    const auto& e = k == 0 ? e0 : e1;
    for (std::size_t j = 0; j < e.size(); ++j) model.params.at("classifier.w").value(j, k) = 1000.0 * e[j];
  }
  model.params.at("classifier.b").value.setZero();
  const auto l = combined_loss(model, batch, {});
  const double tau = l.temperature;
  const double floor = std::log1p(std::exp((s - 1.0) / tau));
  for (const auto& [k, v] : l.contrastive) CHECK(v == doctest::Approx(floor).epsilon(1e-5));
  for (const auto& [k, v] : l.classification) CHECK(v < 1e-6);
}

TEST_CASE("learning-rate schedule") {
  const GroupRates peaks{5e-5, 1e-5, 5e-5, 5e-3};
  const long W = 4 * 10, T = 70 * 10;
  for (double peak : peaks) {
    CHECK(scheduled_lr(peak, W - 1, W, T) == peak);
    CHECK(scheduled_lr(peak, 0, W, T) == doctest::Approx(peak / W));
    CHECK(scheduled_lr(peak, W + (T - W) / 2, W, T) == doctest::Approx(peak / 2));
    CHECK(scheduled_lr(peak, T, W, T) == doctest::Approx(0.0));
    for (long s = W; s < T; ++s) CHECK(scheduled_lr(peak, s + 1, W, T) <= scheduled_lr(peak, s, W, T));
  }

  TrainingConfig tc = toy_training(3);
  tc.peak_lr = peaks;
  tc.warmup_epochs = 2;
  const auto set = make_toy_set(tc.model, 6, 2);
  const auto r = train(set.instances, set.summaries, tc);
  REQUIRE(r.log.size() == 3);
  for (int g = 0; g < 4; ++g) {
    CHECK(r.log[1].lr[g] == peaks[g]);
    CHECK(r.log[0].lr[g] < peaks[g]);
    CHECK(r.log[2].lr[g] < peaks[g]);
  }
}

TEST_CASE("AdamW step") {
  ParameterStore s;
  auto& w = s.add("fusion.w", Matrix::Constant(2, 2, 1.0), ParamGroup::fusion, true);
  auto& b = s.add("other.b", Matrix::Constant(1, 2, 1.0), ParamGroup::other, false);
  w.grad = Matrix::Constant(2, 2, 0.5);
  b.grad = Matrix::Constant(1, 2, -2.0);
  AdamW opt(0.9, 0.999, 1e-8, 0.01);
  opt.step(s, {0.0, 0.0, 0.1, 0.2});
  // First step: m_hat = g, v_hat = g^2, update = lr * sign(g) (up to eps).
  CHECK(w.value(0, 0) == doctest::Approx(1.0 * (1 - 0.1 * 0.01) - 0.1 * 0.5 / (0.5 + 1e-8)).epsilon(1e-12));
  CHECK(b.value(0, 1) == doctest::Approx(1.0 + 0.2 * 2.0 / (2.0 + 1e-8)).epsilon(1e-12));
  CHECK(opt.steps() == 1);
}

TEST_CASE("training is deterministic and reduces the loss") {
  const auto dir = std::filesystem::temp_directory_path() / "ampere_train_test";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  TrainingConfig tc = toy_training(2);
  const auto set = make_toy_set(tc.model, 8, 11);
  const auto a = train(set.instances, set.summaries, tc);
  const auto b = train(set.instances, set.summaries, tc);
  save_checkpoint(a.model, dir / "a.ckpt");
  save_checkpoint(b.model, dir / "b.ckpt");
  CHECK(read_file(dir / "a.ckpt") == read_file(dir / "b.ckpt"));
  CHECK(a.model.config.num_classes == 8);
  CHECK(a.model.config.vocab.size() > 3);

  TrainingConfig longer = toy_training(11);
  longer.checkpoint_every = 5;
  std::vector<int> seen;
  TrainOptions opts;
  opts.checkpoint_dir = dir / "ckpt";
  opts.on_epoch = [&](const EpochLog& e) { seen.push_back(e.epoch); };
  const auto r = train(set.instances, set.summaries, longer, opts);
  REQUIRE(r.log.size() == 11);
  CHECK(seen.size() == 11);
  MESSAGE("toy total loss: epoch 0 = " << r.log[0].loss.total << ", epoch 10 = " << r.log[10].loss.total);
  CHECK(r.log[10].loss.total < r.log[0].loss.total);
  for (const auto& e : r.log) CHECK(e.loss.temperature > 0.0);
  CHECK(std::filesystem::exists(dir / "ckpt" / "epoch_5.ckpt"));
  CHECK(std::filesystem::exists(dir / "ckpt" / "epoch_10.ckpt"));

  write_loss_log(r.log, dir / "loss.csv");
  std::ifstream f(dir / "loss.csv");
  std::string header, first;
  std::getline(f, header);
  std::getline(f, first);
  CHECK(header == "epoch,L_PS,L_PL,L_SL,CE_P,CE_S,CE_L,total,lr_group_1,lr_group_2,lr_group_3,lr_group_4");
  CHECK(std::count(first.begin(), first.end(), ',') == 11);

  TrainingConfig no_live = toy_training(1);
  no_live.excluded_domains = {Domain::L};
  const auto nl = train(set.instances, set.summaries, no_live);
  write_loss_log(nl.log, dir / "nl.csv");
  std::ifstream g(dir / "nl.csv");
  std::getline(g, header);
  std::getline(g, first);
  CHECK(first.find(",,") != std::string::npos);
  CHECK(nl.log[0].loss.contrastive.size() == 1);
  std::filesystem::remove_all(dir);
}

TEST_CASE("divergence guard names the batch") {
  TrainingConfig tc = toy_training(2);
  const auto set = make_toy_set(tc.model, 8, 12);
  TrainOptions opts;
  opts.inspect_loss = [](int epoch, int batch, double& total) {
    if (epoch == 1 && batch == 1) total = std::nan("");
  };
  try {
    train(set.instances, set.summaries, tc, opts);
    FAIL("expected divergence");
  } catch (const TrainingDiverged& e) {
    CHECK(e.epoch() == 1);
    CHECK(e.batch() == 1);
    CHECK(std::string(e.what()).find("batch 1") != std::string::npos);
  }
}

TEST_CASE("training input validation") {
  TrainingConfig tc = toy_training(1);
  const auto set = make_toy_set(tc.model, 1, 1);
  CHECK_THROWS_AS(train(set.instances, set.summaries, tc), UsageError);
  tc.batch_size = 1;
  CHECK_THROWS_AS(tc.validate(), UsageError);
  tc = toy_training(1);
  tc.excluded_domains = {Domain::P, Domain::L};
  CHECK_THROWS_AS(tc.validate(), UsageError);
  tc = toy_training(1);
  tc.warmup_epochs = 5;
  CHECK_THROWS_AS(tc.validate(), UsageError);

  // A product missing its live instance is skipped.
  auto partial = make_toy_set(toy_training(1).model, 3, 2);
  partial.instances.pop_back();
  const auto r = train(partial.instances, partial.summaries, toy_training(1));
  CHECK(r.skipped_products == 1);
  CHECK(r.labels.size() == 2);
}

TEST_CASE("training config json") {
  TrainingConfig tc = toy_training(3);
  tc.excluded_domains = {Domain::S};
  tc.model.fusion_variant = FusionVariant::xa_v_as_q;
  nlohmann::json j = tc;
  CHECK(j.get<TrainingConfig>() == tc);
  CHECK(j["lr"]["visual"] == 1e-3);
  auto partial = nlohmann::json{{"epochs", 5}}.get<TrainingConfig>();
  CHECK(partial.epochs == 5);
  CHECK(partial.peak_lr == GroupRates{5e-5, 1e-5, 5e-5, 5e-3});
  CHECK(partial.batch_size == 128);
  CHECK(partial.warmup_epochs == 4);
}

TEST_CASE("gradient check of the combined loss") {
  auto c = tiny_config();
  c.num_classes = 2;
  const auto set = make_toy_set(c, 2, 31);
  Model model = init_model(c, 32);
  jitter(model, 33);
  const auto batch = batch_of(set, {0, 1});
  auto starts = [](const std::string& n, const char* p) { return n.rfind(p, 0) == 0; };
  const auto temporal = grad_check(model, batch, {}, 1e-5, 200, 1,
                                   [&](const std::string& n) { return starts(n, "visual.temporal"); });
  CHECK(temporal.entries >= 200);
  CHECK(temporal.max_rel_error < 1e-4);
  const auto fusion = grad_check(model, batch, {}, 1e-5, 200, 2, [&](const std::string& n) {
    return starts(n, "fusion.block") || n == "fusion.seg";
  });
  CHECK(fusion.max_rel_error < 1e-4);
  const auto tau = grad_check(model, batch, {}, 1e-5, 200, 3,
                              [](const std::string& n) { return n == "log_tau"; });
  CHECK(tau.entries == 1);
  CHECK(tau.max_rel_error < 1e-4);
}
