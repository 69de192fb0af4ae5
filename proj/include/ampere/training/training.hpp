#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "ampere/core/config.hpp"
#include "ampere/core/error.hpp"
#include "ampere/encoders/model.hpp"
#include "ampere/textproc/summarize.hpp"

namespace ampere {

// Learning rates in optimizer-group order: text encoder, visual encoder,
// fusion, other.
using GroupRates = std::array<double, nn::kNumParamGroups>;

struct TrainingConfig {
  ModelConfig model;
  std::vector<Domain> excluded_domains;
  GroupRates peak_lr{5e-5, 1e-5, 5e-5, 5e-3};
  int warmup_epochs = 4;
  int epochs = 70;
  int batch_size = 128;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 0.01;
  int checkpoint_every = 0;  // epochs; 0 disables
  int vocab_min_count = 2;

  void validate() const;
  bool excludes(Domain d) const;
  bool operator==(const TrainingConfig&) const = default;
};

void to_json(nlohmann::json& j, const TrainingConfig& c);
void from_json(const nlohmann::json& j, TrainingConfig& c);
TrainingConfig load_training_config(const std::filesystem::path& path);

// Contrastive pair keys in log order.
inline constexpr std::array<std::pair<Domain, Domain>, 3> kDomainPairs{
    std::pair{Domain::P, Domain::S}, std::pair{Domain::P, Domain::L},
    std::pair{Domain::S, Domain::L}};
std::string pair_key(Domain a, Domain b);  // "PS", "PL", "SL"

struct LossBreakdown {
  std::map<std::string, double> contrastive;  // present pairs only
  std::map<Domain, double> classification;    // present domains only
  double total = 0.0;
  double temperature = 0.0;
};

// Symmetric InfoNCE of matching rows. Rows must be unit norm within 1e-3,
// B >= 2, tau > 0.
double info_nce_pair(const nn::Matrix& a, const nn::Matrix& b, double tau);
// Mean softmax cross-entropy of (E W + bias) against labels in [0, C).
double classification_loss(const nn::Matrix& e, const std::vector<std::int32_t>& labels,
                           const nn::Matrix& w, const nn::Matrix& bias);

// One product of a batch: its instance and summary per domain (null for an
// excluded domain) and its class label.
struct TripletItem {
  std::array<const ProductInstance*, 3> instance{};
  std::array<const SummaryRecord*, 3> summary{};
  std::int32_t label = 0;
};
using BatchTriplet = std::vector<TripletItem>;

struct LossGraph {
  nn::Var total;
  LossBreakdown breakdown;
};

// Embeds every present domain on its own branch, then sums the pairwise
// InfoNCE terms and the per-domain classification terms with unit weights.
// Terms naming an excluded domain are dropped.
LossGraph combined_loss(nn::Tape& tape, Model& model, const BatchTriplet& batch,
                        const std::vector<Domain>& excluded);
LossBreakdown combined_loss(const Model& model, const BatchTriplet& batch,
                            const std::vector<Domain>& excluded);

// Linear warmup to `peak` over `warmup_steps` (reaching it on the last
// warmup step), then cosine decay to zero at `total_steps`.
double scheduled_lr(double peak, long step, long warmup_steps, long total_steps);

// Decoupled weight decay Adam over a parameter store.
class AdamW {
 public:
  AdamW(double beta1, double beta2, double eps, double weight_decay);
  void step(nn::ParameterStore& params, const GroupRates& lr);
  long steps() const { return t_; }

 private:
  struct Moments {
    nn::Matrix m, v;
  };
  double beta1_, beta2_, eps_, wd_;
  long t_ = 0;
  std::map<std::string, Moments> moments_;
};

class TrainingDiverged : public DataError {
 public:
  TrainingDiverged(int epoch, int batch)
      : DataError("non-finite loss at epoch " + std::to_string(epoch) + " batch " +
                  std::to_string(batch)),
        epoch_(epoch),
        batch_(batch) {}
  int epoch() const { return epoch_; }
  int batch() const { return batch_; }

 private:
  int epoch_, batch_;
};

struct EpochLog {
  int epoch = 0;
  LossBreakdown loss;  // mean over the epoch's batches
  GroupRates lr{};     // rates of the epoch's last step
};

struct TrainOptions {
  std::filesystem::path checkpoint_dir;  // used when checkpoint_every > 0
  std::function<void(const EpochLog&)> on_epoch;
  // Test hook: called after each batch's loss is known; may alter it.
  std::function<void(int epoch, int batch, double& total)> inspect_loss;
};

struct TrainResult {
  Model model;
  std::vector<EpochLog> log;
  std::map<std::string, std::int32_t> labels;  // product id -> class
  std::size_t skipped_products = 0;            // lacking a required domain
};

// Products are the classes. Each epoch draws one instance per product and
// present domain, shuffles products with the seeded stream and splits them
// into batches (a trailing batch of one joins the previous batch). An empty
// model vocabulary is built from the summaries' encoder texts.
TrainResult train(const std::vector<ProductInstance>& instances,
                  const textproc::SummaryTable& summaries, const TrainingConfig& config,
                  const TrainOptions& options = {});

// CSV: epoch,L_PS,L_PL,L_SL,CE_P,CE_S,CE_L,total,lr_group_1..4; absent terms
// are left empty.
void write_loss_log(const std::vector<EpochLog>& log, const std::filesystem::path& path);

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::map<std::string, double> per_tensor;
  std::size_t entries = 0;
};

// Central differences of the combined loss against the tape gradient on up
// to `samples_per_tensor` random entries of each selected tensor (all when
// smaller). Relative error is |num - ana| / max(|num|, |ana|, 1e-5).
GradCheckReport grad_check(Model& model, const BatchTriplet& batch,
                           const std::vector<Domain>& excluded, double epsilon = 1e-5,
                           int samples_per_tensor = 200, std::uint64_t seed = 0,
                           const std::function<bool(const std::string&)>& select = {});

}  // namespace ampere
