#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "ampere/core/types.hpp"

namespace ampere::synthgen {

struct SynthConfig {
  int num_products = 64;
  int instances_per_domain = 3;
  int frame_height = 12;
  int frame_width = 12;
  int channels = 3;
  int short_frames = 12;
  int live_frames = 24;
  double visual_intra_variance = 0.3;
  double visual_inter_similarity = 0.0;
  double asr_noise_ratio = 0.9;
  double no_output_rate = 0.0;
  double asr_missing_rate = 0.0;
  double distractor_rate = 0.5;  // share of L instances with an overlay
  double test_fraction = 0.1;
  std::uint64_t seed = 0;

  // Throws UsageError naming the offending field.
  void validate() const;
};

void to_json(nlohmann::json& j, const SynthConfig& c);
void from_json(const nlohmann::json& j, SynthConfig& c);
SynthConfig load_synth_config(const std::filesystem::path& path);

struct ProductTruth {
  std::string product_id;
  std::string true_name;
  std::vector<std::string> true_attributes;

  bool operator==(const ProductTruth&) const = default;
};

struct ProductSpec {
  ProductTruth truth;
  Tensor prototype;  // (H, W, C), zero mean, unit variance per component
};

// Independent stream for (seed, product index, purpose). Products never share
// a stream, so generation order does not affect the output.
std::mt19937_64 product_stream(std::uint64_t seed, std::uint64_t index, std::uint64_t purpose);

// Prototype = shared base * sqrt(s) + own component * sqrt(1 - s), both
// smooth random fields. Names are "<adjective>-<noun>-<index>".
std::vector<ProductSpec> generate_products(const SynthConfig& config);

// One instance of `product` in domain `d`. P: the prototype plus light noise
// and the clean title. S/L: a shift/scale path across the clip plus noise;
// L clips run longer, move further and may carry another product's patch
// (`distractor`).
ProductInstance render_domain_instance(const ProductSpec& product, Domain d, int ordinal,
                                       const SynthConfig& config, std::mt19937_64& rng,
                                       const Tensor* distractor = nullptr);

// Marker-annotated name and attribute words interleaved with chatter so that
// signal characters make up about 1 - asr_noise_ratio of the transcript.
std::string inject_asr_noise(const std::string& true_name,
                             const std::vector<std::string>& attributes,
                             const SynthConfig& config, std::mt19937_64& rng);

// Title for the product page: name followed by the attributes, unmarked.
std::string product_title(const ProductTruth& truth);

struct SynthDataset {
  std::vector<ProductInstance> train;
  std::vector<ProductInstance> test;
  std::vector<ProductTruth> truth;
};

// Products are split (not instances). `threads` > 1 renders products in
// parallel with identical output.
SynthDataset generate(const SynthConfig& config, int threads = 1);

// Writes train.jsonl, test.jsonl, frames/ and ground_truth.jsonl under `dir`.
SynthDataset generate_dataset(const SynthConfig& config, const std::filesystem::path& dir,
                              int threads = 1);

void save_ground_truth(const std::vector<ProductTruth>& truth, const std::filesystem::path& path);
std::vector<ProductTruth> load_ground_truth(const std::filesystem::path& path);

}  // namespace ampere::synthgen
