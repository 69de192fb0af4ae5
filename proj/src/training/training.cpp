#include "ampere/training/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ampere/fusion/fusion.hpp"
#include "ampere/nn/ops.hpp"

namespace ampere {

using nn::Matrix;
using nn::Tape;
using nn::Var;

namespace {

constexpr std::array<const char*, nn::kNumParamGroups> kGroupKeys{"text", "visual", "fusion",
                                                                  "other"};

std::size_t di(Domain d) { return static_cast<std::size_t>(d); }

std::vector<Domain> present_domains(const std::vector<Domain>& excluded) {
  std::vector<Domain> out;
  for (Domain d : kAllDomains) {
    if (std::find(excluded.begin(), excluded.end(), d) == excluded.end()) out.push_back(d);
  }
  return out;
}

// Batch boundaries: chunks of `size`, a trailing single item joins the
// previous chunk.
std::vector<std::pair<std::size_t, std::size_t>> batch_ranges(std::size_t n, std::size_t size) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t s = 0; s < n; s += size) out.emplace_back(s, std::min(n, s + size));
  if (out.size() > 1 && out.back().second - out.back().first < 2) {
    out[out.size() - 2].second = out.back().second;
    out.pop_back();
  }
  return out;
}

}  // namespace

bool TrainingConfig::excludes(Domain d) const {
  return std::find(excluded_domains.begin(), excluded_domains.end(), d) != excluded_domains.end();
}

void TrainingConfig::validate() const {
  model.validate();
  if (epochs < 1) throw UsageError("epochs must be >= 1");
  if (warmup_epochs < 0 || warmup_epochs > epochs) {
    throw UsageError("warmup_epochs must lie in [0, epochs]");
  }
  if (batch_size < 2) throw UsageError("batch_size must be >= 2 (in-batch negatives)");
  for (double lr : peak_lr) {
    if (!(lr >= 0.0)) throw UsageError("learning rates must be >= 0");
  }
  if (present_domains(excluded_domains).size() < 2) {
    throw UsageError("at least two domains must remain for a contrastive pair");
  }
  if (!(weight_decay >= 0.0)) throw UsageError("weight_decay must be >= 0");
  if (checkpoint_every < 0) throw UsageError("checkpoint_every must be >= 0");
}

void to_json(nlohmann::json& j, const TrainingConfig& c) {
  std::vector<std::string> excluded;
  for (Domain d : c.excluded_domains) excluded.emplace_back(to_string(d));
  nlohmann::json lr;
  for (int g = 0; g < nn::kNumParamGroups; ++g) lr[kGroupKeys[g]] = c.peak_lr[g];
  j = {{"model", c.model},
       {"excluded_domains", excluded},
       {"lr", lr},
       {"warmup_epochs", c.warmup_epochs},
       {"epochs", c.epochs},
       {"batch_size", c.batch_size},
       {"seed", c.seed},
       {"beta1", c.beta1},
       {"beta2", c.beta2},
       {"adam_eps", c.adam_eps},
       {"weight_decay", c.weight_decay},
       {"checkpoint_every", c.checkpoint_every},
       {"vocab_min_count", c.vocab_min_count}};
}

void from_json(const nlohmann::json& j, TrainingConfig& c) {
  if (j.contains("model")) c.model = j.at("model").get<ModelConfig>();
  if (j.contains("excluded_domains")) {
    c.excluded_domains.clear();
    for (const auto& d : j.at("excluded_domains")) {
      c.excluded_domains.push_back(parse_domain(d.get<std::string>()));
    }
  }
  if (j.contains("lr")) {
    const auto& lr = j.at("lr");
    for (int g = 0; g < nn::kNumParamGroups; ++g) {
      if (lr.contains(kGroupKeys[g])) c.peak_lr[g] = lr.at(kGroupKeys[g]).get<double>();
    }
  }
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("warmup_epochs", c.warmup_epochs);
  get("epochs", c.epochs);
  get("batch_size", c.batch_size);
  get("seed", c.seed);
  get("beta1", c.beta1);
  get("beta2", c.beta2);
  get("adam_eps", c.adam_eps);
  get("weight_decay", c.weight_decay);
  get("checkpoint_every", c.checkpoint_every);
  get("vocab_min_count", c.vocab_min_count);
}

TrainingConfig load_training_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw DataError("missing training config: " + path.string());
  auto j = nlohmann::json::parse(f, nullptr, false);
  if (j.is_discarded()) throw DataError("malformed training config: " + path.string());
  TrainingConfig c;
  try {
    c = j.get<TrainingConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError("bad training config " + path.string() + ": " + e.what());
  }
  c.validate();
  return c;
}

std::string pair_key(Domain a, Domain b) {
  return std::string(to_string(a)) + std::string(to_string(b));
}

double info_nce_pair(const Matrix& a, const Matrix& b, double tau) {
  if (!(tau > 0.0)) throw UsageError("temperature must be > 0");
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw UsageError("info_nce_pair: shape mismatch");
  if (a.rows() < 2) throw UsageError("info_nce_pair: batch size must be >= 2");
  for (const Matrix* m : {&a, &b}) {
    for (Eigen::Index i = 0; i < m->rows(); ++i) {
      if (std::abs(m->row(i).norm() - 1.0) > 1e-3) {
        throw UsageError("info_nce_pair: rows must be unit norm");
      }
    }
  }
  Tape t(false);
  return nn::info_nce(t.constant(a), t.constant(b), t.constant(Matrix::Constant(1, 1, std::log(tau))))
      .value()(0, 0);
}

double classification_loss(const Matrix& e, const std::vector<std::int32_t>& labels,
                           const Matrix& w, const Matrix& bias) {
  if (static_cast<std::size_t>(e.rows()) != labels.size()) {
    throw UsageError("classification_loss: one label per row required");
  }
  for (auto l : labels) {
    if (l < 0 || l >= w.cols()) {
      throw UsageError("classification_loss: label " + std::to_string(l) + " outside [0, " +
                       std::to_string(w.cols()) + ")");
    }
  }
  Tape t(false);
  return nn::cross_entropy(nn::linear(t.constant(e), t.constant(w), t.constant(bias)), labels)
      .value()(0, 0);
}

LossGraph combined_loss(Tape& t, Model& model, const BatchTriplet& batch,
                        const std::vector<Domain>& excluded) {
  const auto domains = present_domains(excluded);
  if (domains.size() < 2) throw UsageError("combined_loss: fewer than two domains present");
  if (batch.size() < 2) throw UsageError("combined_loss: batch size must be >= 2");

  std::vector<std::int32_t> labels;
  for (const auto& item : batch) labels.push_back(item.label);

  std::array<Var, 3> emb;
  for (Domain d : domains) {
    std::vector<Var> rows;
    for (const auto& item : batch) {
      const auto* inst = item.instance[di(d)];
      const auto* sum = item.summary[di(d)];
      if (!inst || !sum) {
        throw UsageError("combined_loss: batch item lacks domain " + std::string(to_string(d)));
      }
      rows.push_back(embed(t, model, *inst, *sum, d));
    }
    emb[di(d)] = nn::concat_rows(rows);
  }

  LossGraph g;
  std::vector<Var> terms;
  Var log_tau = model.param(t, "log_tau", Domain::P);
  g.breakdown.temperature = std::exp(log_tau.value()(0, 0));
  for (auto [a, b] : kDomainPairs) {
    if (!emb[di(a)].valid() || !emb[di(b)].valid()) continue;
    Var l = nn::info_nce(emb[di(a)], emb[di(b)], log_tau);
    g.breakdown.contrastive[pair_key(a, b)] = l.value()(0, 0);
    terms.push_back(l);
  }
  for (Domain d : domains) {
    Var logits = nn::linear(emb[di(d)], model.param(t, "classifier.w", d),
                            model.param(t, "classifier.b", d));
    Var l = nn::cross_entropy(logits, labels);
    g.breakdown.classification[d] = l.value()(0, 0);
    terms.push_back(l);
  }
  g.total = nn::sum_scalars(terms);
  g.breakdown.total = g.total.value()(0, 0);
  return g;
}

LossBreakdown combined_loss(const Model& model, const BatchTriplet& batch,
                            const std::vector<Domain>& excluded) {
  Tape t(false);  // reads parameters only
  return combined_loss(t, const_cast<Model&>(model), batch, excluded).breakdown;
}

double scheduled_lr(double peak, long step, long warmup_steps, long total_steps) {
  if (step < warmup_steps) {
    return peak * static_cast<double>(step + 1) / static_cast<double>(warmup_steps);
  }
  const long decay_steps = total_steps - warmup_steps;
  if (decay_steps <= 0) return 0.0;
  const double progress =
      std::min(1.0, static_cast<double>(step - warmup_steps) / static_cast<double>(decay_steps));
  return peak * 0.5 * (1.0 + std::cos(M_PI * progress));
}

AdamW::AdamW(double beta1, double beta2, double eps, double weight_decay)
    : beta1_(beta1), beta2_(beta2), eps_(eps), wd_(weight_decay) {}

void AdamW::step(nn::ParameterStore& params, const GroupRates& lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (auto& [name, p] : params.items()) {
    auto& mom = moments_[name];
    if (mom.m.size() == 0) {
      mom.m = Matrix::Zero(p.value.rows(), p.value.cols());
      mom.v = Matrix::Zero(p.value.rows(), p.value.cols());
    }
    const double rate = lr[static_cast<std::size_t>(p.group)];
    mom.m = beta1_ * mom.m + (1.0 - beta1_) * p.grad;
    mom.v = beta2_ * mom.v + (1.0 - beta2_) * p.grad.cwiseAbs2();
    if (p.decay) p.value *= (1.0 - rate * wd_);
    p.value.array() -= rate * (mom.m.array() / c1) / ((mom.v.array() / c2).sqrt() + eps_);
  }
}

TrainResult train(const std::vector<ProductInstance>& instances,
                  const textproc::SummaryTable& summaries, const TrainingConfig& config,
                  const TrainOptions& options) {
  config.validate();
  const auto domains = present_domains(config.excluded_domains);

  std::map<std::string, std::array<std::vector<const ProductInstance*>, 3>> by_product;
  for (const auto& inst : instances) by_product[inst.product_id][di(inst.domain)].push_back(&inst);

  TrainResult result;
  std::vector<std::string> products;
  for (const auto& [pid, per_domain] : by_product) {
    const bool complete = std::all_of(domains.begin(), domains.end(),
                                      [&](Domain d) { return !per_domain[di(d)].empty(); });
    if (complete) {
      result.labels[pid] = static_cast<std::int32_t>(products.size());
      products.push_back(pid);
    } else {
      ++result.skipped_products;
    }
  }
  if (products.size() < 2) throw UsageError("training needs at least two complete products");

  auto summary_of = [&](const ProductInstance* inst) -> const SummaryRecord* {
    auto it = summaries.find(inst->instance_id);
    if (it == summaries.end()) {
      throw DataError("no summary for instance '" + inst->instance_id + "'");
    }
    return &it->second;
  };

  ModelConfig mc = config.model;
  mc.num_classes = static_cast<int>(products.size());
  if (mc.vocab.size() <= 3 && mc.modality != Modality::visual_only) {
    std::vector<std::string> texts;
    for (const auto& pid : products) {
      for (Domain d : domains) {
        for (const auto* inst : by_product[pid][di(d)]) {
          texts.push_back(textproc::encoder_text(*summary_of(inst)));
        }
      }
    }
    mc.vocab = Vocab::build(texts, config.vocab_min_count);
  }
  result.model = init_model(mc, config.seed);
  Model& model = result.model;

  std::mt19937_64 rng(config.seed ^ 0x5eed5eedULL);
  const auto ranges = batch_ranges(products.size(), static_cast<std::size_t>(config.batch_size));
  const long steps_per_epoch = static_cast<long>(ranges.size());
  const long warmup_steps = steps_per_epoch * config.warmup_epochs;
  const long total_steps = steps_per_epoch * config.epochs;
  AdamW opt(config.beta1, config.beta2, config.adam_eps, config.weight_decay);

  std::vector<std::size_t> order(products.size());
  std::iota(order.begin(), order.end(), 0);
  long step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    BatchTriplet items;
    for (std::size_t k : order) {
      TripletItem item;
      item.label = static_cast<std::int32_t>(k);
      for (Domain d : domains) {
        const auto& pool = by_product[products[k]][di(d)];
        const auto* inst = pool[pool.size() == 1 ? 0 : rng() % pool.size()];
        item.instance[di(d)] = inst;
        item.summary[di(d)] = summary_of(inst);
      }
      items.push_back(item);
    }

    EpochLog log;
    log.epoch = epoch;
    for (std::size_t b = 0; b < ranges.size(); ++b) {
      const BatchTriplet batch(items.begin() + static_cast<long>(ranges[b].first),
                               items.begin() + static_cast<long>(ranges[b].second));
      GroupRates lr{};
      for (int g = 0; g < nn::kNumParamGroups; ++g) {
        lr[g] = scheduled_lr(config.peak_lr[g], step, warmup_steps, total_steps);
      }
      model.params.zero_grad();
      Tape t;
      LossGraph loss = combined_loss(t, model, batch, config.excluded_domains);
      double total = loss.breakdown.total;
      if (options.inspect_loss) options.inspect_loss(epoch, static_cast<int>(b), total);
      if (!std::isfinite(total)) throw TrainingDiverged(epoch, static_cast<int>(b));
      t.backward(loss.total);
      opt.step(model.params, lr);
      ++step;

      for (const auto& [k, v] : loss.breakdown.contrastive) log.loss.contrastive[k] += v;
      for (const auto& [k, v] : loss.breakdown.classification) log.loss.classification[k] += v;
      log.loss.total += total;
      log.lr = lr;
    }
    const double nb = static_cast<double>(ranges.size());
    for (auto& [k, v] : log.loss.contrastive) v /= nb;
    for (auto& [k, v] : log.loss.classification) v /= nb;
    log.loss.total /= nb;
    log.loss.temperature = std::exp(model.params.at("log_tau").value(0, 0));
    result.log.push_back(log);
    if (options.on_epoch) options.on_epoch(log);
    if (config.checkpoint_every > 0 && (epoch + 1) % config.checkpoint_every == 0 &&
        !options.checkpoint_dir.empty()) {
      std::filesystem::create_directories(options.checkpoint_dir);
      save_checkpoint(model, options.checkpoint_dir / ("epoch_" + std::to_string(epoch + 1) + ".ckpt"));
    }
  }
  return result;
}

void write_loss_log(const std::vector<EpochLog>& log, const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot write loss log: " + path.string());
  f << "epoch,L_PS,L_PL,L_SL,CE_P,CE_S,CE_L,total,lr_group_1,lr_group_2,lr_group_3,lr_group_4\n";
  f << std::setprecision(10);
  for (const auto& e : log) {
    f << e.epoch;
    for (auto [a, b] : kDomainPairs) {
      f << ',';
      if (auto it = e.loss.contrastive.find(pair_key(a, b)); it != e.loss.contrastive.end()) {
        f << it->second;
      }
    }
    for (Domain d : kAllDomains) {
      f << ',';
      if (auto it = e.loss.classification.find(d); it != e.loss.classification.end()) f << it->second;
    }
    f << ',' << e.loss.total;
    for (double lr : e.lr) f << ',' << lr;
    f << '\n';
  }
}

GradCheckReport grad_check(Model& model, const BatchTriplet& batch,
                           const std::vector<Domain>& excluded, double epsilon,
                           int samples_per_tensor, std::uint64_t seed,
                           const std::function<bool(const std::string&)>& select) {
  if (!(epsilon > 0.0)) throw UsageError("grad_check: epsilon must be > 0");
  model.params.zero_grad();
  {
    Tape t;
    auto loss = combined_loss(t, model, batch, excluded);
    t.backward(loss.total);
  }
  auto objective = [&] { return combined_loss(model, batch, excluded).total; };

  std::mt19937_64 rng(seed);
  GradCheckReport report;
  for (auto& [name, p] : model.params.items()) {
    if (select && !select(name)) continue;
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(p.value.size()));
    std::iota(idx.begin(), idx.end(), 0);
    if (samples_per_tensor > 0 && idx.size() > static_cast<std::size_t>(samples_per_tensor)) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(static_cast<std::size_t>(samples_per_tensor));
    }
    double worst = 0.0;
    for (Eigen::Index i : idx) {
      const double orig = p.value.data()[i];
      p.value.data()[i] = orig + epsilon;
      const double up = objective();
      p.value.data()[i] = orig - epsilon;
      const double down = objective();
      p.value.data()[i] = orig;
      const double numeric = (up - down) / (2.0 * epsilon);
      const double analytic = p.grad.data()[i];
      worst = std::max(worst, std::abs(numeric - analytic) /
                                  std::max({std::abs(numeric), std::abs(analytic), 1e-5}));
    }
    report.per_tensor[name] = worst;
    report.entries += idx.size();
    report.max_rel_error = std::max(report.max_rel_error, worst);
  }
  return report;
}

}  // namespace ampere
