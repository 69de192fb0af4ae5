#include "ampere/synthgen/synthgen.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <thread>

#include "ampere/core/dataset.hpp"
#include "ampere/core/error.hpp"

namespace ampere::synthgen {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kBaseIndex = ~std::uint64_t{0};
enum Purpose : std::uint64_t { kIdentity = 1, kInstances = 2, kSplit = 3, kBase = 4 };

constexpr std::array kAdjectives{"crimson", "azure", "golden", "silver", "ivory",  "jade",
                                 "amber",   "coral", "onyx",   "scarlet", "violet", "olive",
                                 "pearl",   "ruby",  "cobalt", "copper", "frost",  "lunar",
                                 "solar",   "velvet", "misty", "nova",   "polar",  "ember"};

constexpr std::array kNouns{"kettle",  "shaver",  "lamp",    "blender", "sneaker", "backpack",
                            "jacket",  "teapot",  "headset", "speaker", "wallet",  "scarf",
                            "mug",     "pillow",  "toaster", "camera",  "watch",   "umbrella",
                            "heater",  "hairdryer", "blanket", "tumbler", "sandal", "cushion"};

constexpr std::array kAttributes{
    "waterproof", "portable",    "wireless",  "rechargeable", "foldable",   "lightweight",
    "stainless",  "ceramic",     "cotton",    "leather",      "silk",       "bamboo",
    "magnetic",   "adjustable",  "ergonomic", "compact",      "insulated",  "breathable",
    "washable",   "quiet",       "durable",   "handmade",     "organic",    "scented",
    "matte",      "glossy",      "striped",   "vintage",      "transparent", "rotating",
    "heated",     "cordless",    "reusable",  "nonstick",     "padded",     "retractable",
    "dimmable",   "antibacterial", "unisex",  "oversized"};

// Live-stream chatter: greetings, calls to action and stopwords.
constexpr std::array kChatter{
    "hello",  "everyone", "welcome", "guys",    "family", "babies",   "sisters", "link",
    "click",  "cart",     "buy",     "grab",    "deal",   "deals",    "today",   "tonight",
    "live",   "stream",   "room",    "thanks",  "thank",  "follow",   "like",    "share",
    "comment", "really",  "super",   "nice",    "look",   "come",     "quick",   "stock",
    "order",  "coupon",   "gift",    "fans",    "wow",    "amazing",  "hurry",   "limited",
    "cheap",  "discount", "gorgeous", "check",  "wait",   "seconds",  "minute",  "countdown",
    "ready",  "lucky",    "the",     "you",     "we",     "this",     "so",      "and",
    "is",     "it",       "to",      "just",    "oh",     "ok",       "well",    "yes",
    "very",   "now",      "here",    "all",     "our",    "your"};

template <class T, std::size_t N>
const T& pick(const std::array<T, N>& a, std::mt19937_64& rng) {
  return a[std::uniform_int_distribution<std::size_t>(0, N - 1)(rng)];
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// Gaussian grid at half resolution, bilinearly upsampled and standardised.
std::vector<double> smooth_field(const SynthConfig& c, std::mt19937_64& rng) {
  const int gh = std::max(2, c.frame_height / 2), gw = std::max(2, c.frame_width / 2);
  std::normal_distribution<double> n;
  std::vector<double> grid(static_cast<std::size_t>(gh) * gw * c.channels);
  for (auto& v : grid) v = n(rng);
  std::vector<double> out(static_cast<std::size_t>(c.frame_height) * c.frame_width * c.channels);
  for (int y = 0; y < c.frame_height; ++y) {
    const double gy = c.frame_height > 1 ? y * double(gh - 1) / (c.frame_height - 1) : 0.0;
    const int y0 = std::min(gh - 2, int(gy));
    const double fy = gy - y0;
    for (int x = 0; x < c.frame_width; ++x) {
      const double gx = c.frame_width > 1 ? x * double(gw - 1) / (c.frame_width - 1) : 0.0;
      const int x0 = std::min(gw - 2, int(gx));
      const double fx = gx - x0;
      for (int ch = 0; ch < c.channels; ++ch) {
        auto g = [&](int yy, int xx) { return grid[(std::size_t(yy) * gw + xx) * c.channels + ch]; };
        out[(std::size_t(y) * c.frame_width + x) * c.channels + ch] =
            (1 - fy) * ((1 - fx) * g(y0, x0) + fx * g(y0, x0 + 1)) +
            fy * ((1 - fx) * g(y0 + 1, x0) + fx * g(y0 + 1, x0 + 1));
      }
    }
  }
  double mean = 0, var = 0;
  for (double v : out) mean += v;
  mean /= double(out.size());
  for (double v : out) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / double(out.size()));
  for (auto& v : out) v = (v - mean) / (sd > 0 ? sd : 1.0);
  return out;
}

// Bilinear read of an (H, W, C) tensor at a fractional position, clamped.
float sample(const Tensor& img, double y, double x, int ch) {
  const int H = int(img.shape[0]), W = int(img.shape[1]), C = int(img.shape[2]);
  y = std::clamp(y, 0.0, double(H - 1));
  x = std::clamp(x, 0.0, double(W - 1));
  const int y0 = std::min(H - 1, int(y)), x0 = std::min(W - 1, int(x));
  const int y1 = std::min(H - 1, y0 + 1), x1 = std::min(W - 1, x0 + 1);
  const double fy = y - y0, fx = x - x0;
  auto at = [&](int yy, int xx) { return double(img.data[(std::size_t(yy) * W + xx) * C + ch]); };
  return static_cast<float>((1 - fy) * ((1 - fx) * at(y0, x0) + fx * at(y0, x1)) +
                            fy * ((1 - fx) * at(y1, x0) + fx * at(y1, x1)));
}

struct Pose {
  double dy = 0, dx = 0, scale = 1;
};

std::string instance_suffix(Domain d, int ordinal) {
  return "_" + std::string(to_string(d)) + std::to_string(ordinal);
}

std::string product_id(int index) {
  std::string digits = std::to_string(index);
  return "p" + std::string(digits.size() < 4 ? 4 - digits.size() : 0, '0') + digits;
}

// Code points of the tokens joined by single spaces.
std::size_t joined_length(const std::vector<std::string>& tokens) {
  std::size_t chars = 0;
  for (const auto& t : tokens) chars += utf8_length(t) + 1;
  return chars ? chars - 1 : 0;
}

}  // namespace

void SynthConfig::validate() const {
  auto rate = [](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) throw UsageError(std::string(name) + " must lie in [0, 1]");
  };
  if (num_products < 2) throw UsageError("num_products must be >= 2");
  if (instances_per_domain < 1) throw UsageError("instances_per_domain must be >= 1");
  if (frame_height < 1 || frame_width < 1 || channels < 1) throw UsageError("frame_shape must be positive");
  if (short_frames < 1 || live_frames < 1) throw UsageError("clip lengths must be positive");
  if (!(visual_intra_variance >= 0.0)) throw UsageError("visual_intra_variance must be >= 0");
  if (!(visual_inter_similarity >= 0.0 && visual_inter_similarity < 1.0))
    throw UsageError("visual_inter_similarity must lie in [0, 1)");
  rate(asr_noise_ratio, "asr_noise_ratio");
  rate(no_output_rate, "no_output_rate");
  rate(asr_missing_rate, "asr_missing_rate");
  rate(distractor_rate, "distractor_rate");
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) throw UsageError("test_fraction must lie in [0, 1)");
}

void to_json(json& j, const SynthConfig& c) {
  j = {{"num_products", c.num_products},
       {"instances_per_domain", c.instances_per_domain},
       {"frame_shape", {c.frame_height, c.frame_width, c.channels}},
       {"short_frames", c.short_frames},
       {"live_frames", c.live_frames},
       {"visual_intra_variance", c.visual_intra_variance},
       {"visual_inter_similarity", c.visual_inter_similarity},
       {"asr_noise_ratio", c.asr_noise_ratio},
       {"no_output_rate", c.no_output_rate},
       {"asr_missing_rate", c.asr_missing_rate},
       {"distractor_rate", c.distractor_rate},
       {"test_fraction", c.test_fraction},
       {"seed", c.seed}};
}

void from_json(const json& j, SynthConfig& c) {
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("num_products", c.num_products);
  get("instances_per_domain", c.instances_per_domain);
  if (j.contains("frame_shape")) {
    const auto shape = j.at("frame_shape").get<std::vector<int>>();
    if (shape.size() != 3) throw UsageError("frame_shape must be [H, W, C]");
    c.frame_height = shape[0];
    c.frame_width = shape[1];
    c.channels = shape[2];
  }
  get("short_frames", c.short_frames);
  get("live_frames", c.live_frames);
  get("visual_intra_variance", c.visual_intra_variance);
  get("visual_inter_similarity", c.visual_inter_similarity);
  get("asr_noise_ratio", c.asr_noise_ratio);
  get("no_output_rate", c.no_output_rate);
  get("asr_missing_rate", c.asr_missing_rate);
  get("distractor_rate", c.distractor_rate);
  get("test_fraction", c.test_fraction);
  get("seed", c.seed);
}

SynthConfig load_synth_config(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw DataError("missing synth config: " + path.string());
  auto j = json::parse(f, nullptr, false);
  if (j.is_discarded()) throw DataError("malformed synth config: " + path.string());
  SynthConfig c;
  try {
    c = j.get<SynthConfig>();
  } catch (const json::exception& e) {
    throw DataError("bad synth config " + path.string() + ": " + e.what());
  }
  c.validate();
  return c;
}

std::mt19937_64 product_stream(std::uint64_t seed, std::uint64_t index, std::uint64_t purpose) {
  std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32), std::uint32_t(index),
                    std::uint32_t(index >> 32), std::uint32_t(purpose)};
  return std::mt19937_64(seq);
}

std::vector<ProductSpec> generate_products(const SynthConfig& c) {
  c.validate();
  auto base_rng = product_stream(c.seed, kBaseIndex, kBase);
  const std::vector<double> base = smooth_field(c, base_rng);
  const double s = c.visual_inter_similarity;
  std::vector<ProductSpec> out(static_cast<std::size_t>(c.num_products));
  for (int i = 0; i < c.num_products; ++i) {
    auto rng = product_stream(c.seed, static_cast<std::uint64_t>(i), kIdentity);
    ProductSpec& p = out[static_cast<std::size_t>(i)];
    p.truth.product_id = product_id(i);
    const std::string adj = pick(kAdjectives, rng);
    const std::string noun = pick(kNouns, rng);
    p.truth.true_name = adj + "-" + noun + "-" + std::to_string(i);
    std::vector<std::string> pool(kAttributes.begin(), kAttributes.end());
    std::shuffle(pool.begin(), pool.end(), rng);
    const auto k = std::uniform_int_distribution<std::size_t>(3, 6)(rng);
    p.truth.true_attributes.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k));
    const std::vector<double> own = smooth_field(c, rng);
    p.prototype = Tensor({std::uint32_t(c.frame_height), std::uint32_t(c.frame_width), std::uint32_t(c.channels)});
    for (std::size_t j = 0; j < own.size(); ++j)
      p.prototype.data[j] = static_cast<float>(base[j] * std::sqrt(s) + own[j] * std::sqrt(1 - s));
  }
  return out;
}

std::string product_title(const ProductTruth& truth) {
  std::string t = truth.true_name;
  for (const auto& a : truth.true_attributes) t += " " + a;
  return t;
}

std::string inject_asr_noise(const std::string& true_name, const std::vector<std::string>& attributes,
                             const SynthConfig& c, std::mt19937_64& rng) {
  if (std::bernoulli_distribution(c.asr_missing_rate)(rng)) return std::string(kMissingAsr);
  const bool silent = std::bernoulli_distribution(c.no_output_rate)(rng);

  std::vector<std::string> signal{std::string(kNameMarker) + true_name};
  for (const auto& a : attributes) signal.push_back(std::string(kFeatureMarker) + a);
  const std::size_t signal_chars = joined_length(signal);

  const double r = c.asr_noise_ratio;
  double filler_target;
  if (r >= 1.0) {
    filler_target = 10.0 * double(signal_chars);
    signal.clear();
  } else {
    filler_target = double(signal_chars) * r / (1.0 - r);
    if (silent) {
      filler_target += double(signal_chars);
      signal.clear();
    }
  }
  std::vector<std::string> filler;
  std::size_t filler_chars = 0;
  while (double(filler_chars) < filler_target) {
    filler.emplace_back(pick(kChatter, rng));
    filler_chars += filler.back().size() + 1;
  }

  // Signal words keep their order and land in random gaps of the chatter.
  std::vector<std::size_t> slots(signal.size());
  for (auto& s : slots) s = std::uniform_int_distribution<std::size_t>(0, filler.size())(rng);
  std::sort(slots.begin(), slots.end());
  std::string out;
  std::size_t next = 0;
  auto append = [&out](const std::string& w) {
    if (!out.empty()) out += ' ';
    out += w;
  };
  for (std::size_t f = 0; f <= filler.size(); ++f) {
    while (next < signal.size() && slots[next] == f) append(signal[next++]);
    if (f < filler.size()) append(filler[f]);
  }
  return out;
}

ProductInstance render_domain_instance(const ProductSpec& product, Domain d, int ordinal,
                                       const SynthConfig& c, std::mt19937_64& rng,
                                       const Tensor* distractor) {
  const int H = c.frame_height, W = c.frame_width, C = c.channels;
  const double v = c.visual_intra_variance;
  const std::uint32_t T = d == Domain::P ? 1 : std::uint32_t(d == Domain::S ? c.short_frames : c.live_frames);

  ProductInstance inst;
  inst.product_id = product.truth.product_id;
  inst.instance_id = product.truth.product_id + instance_suffix(d, ordinal);
  inst.domain = d;
  inst.frames = Tensor({T, std::uint32_t(H), std::uint32_t(W), std::uint32_t(C)});

  // Pose path endpoints; L clips roam twice as far.
  const double reach = d == Domain::L ? 2.0 : (d == Domain::S ? 1.0 : 0.0);
  const double shift = reach * v * H / 8.0, zoom = reach * v * 0.1;
  Pose a, b;
  if (reach > 0) {
    a = {uniform(rng, -shift, shift), uniform(rng, -shift, shift), 1 + uniform(rng, -zoom, zoom)};
    b = {uniform(rng, -shift, shift), uniform(rng, -shift, shift), 1 + uniform(rng, -zoom, zoom)};
  }
  const double noise = d == Domain::P ? 0.2 * v : 0.5 * v;

  // Overlay rectangle and active frame span.
  bool overlay = false;
  int oy = 0, ox = 0, oh = 0, ow = 0;
  std::uint32_t t0 = 0, t1 = 0;
  if (d == Domain::L && distractor && std::bernoulli_distribution(c.distractor_rate)(rng)) {
    overlay = true;
    oh = std::max(1, std::uniform_int_distribution<int>(H / 3, H / 2)(rng));
    ow = std::max(1, std::uniform_int_distribution<int>(W / 3, W / 2)(rng));
    oy = std::uniform_int_distribution<int>(0, H - oh)(rng);
    ox = std::uniform_int_distribution<int>(0, W - ow)(rng);
    t0 = std::uniform_int_distribution<std::uint32_t>(0, T / 2)(rng);
    t1 = t0 + T / 2;
  }

  std::normal_distribution<double> n;
  const double cy = (H - 1) / 2.0, cx = (W - 1) / 2.0;
  std::size_t k = 0;
  for (std::uint32_t t = 0; t < T; ++t) {
    const double al = T > 1 ? double(t) / (T - 1) : 0.0;
    const Pose p{a.dy + al * (b.dy - a.dy), a.dx + al * (b.dx - a.dx), a.scale + al * (b.scale - a.scale)};
    const bool covered = overlay && t >= t0 && t < t1;
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        const bool in_patch = covered && y >= oy && y < oy + oh && x >= ox && x < ox + ow;
        const double sy = cy + (y - cy - p.dy) / p.scale, sx = cx + (x - cx - p.dx) / p.scale;
        for (int ch = 0; ch < C; ++ch) {
          double val = in_patch ? distractor->data[(std::size_t(y) * W + x) * C + ch]
                                : (reach > 0 ? sample(product.prototype, sy, sx, ch)
                                             : product.prototype.data[(std::size_t(y) * W + x) * C + ch]);
          if (noise > 0) val += noise * n(rng);
          inst.frames.data[k++] = static_cast<float>(val);
        }
      }
  }

  inst.raw_text = d == Domain::P
                      ? product_title(product.truth)
                      : inject_asr_noise(product.truth.true_name, product.truth.true_attributes, c, rng);
  return inst;
}

SynthDataset generate(const SynthConfig& c, int threads) {
  const std::vector<ProductSpec> products = generate_products(c);
  const auto P = products.size();

  std::vector<std::vector<ProductInstance>> per_product(P);
  auto render = [&](std::size_t i) {
    auto rng = product_stream(c.seed, i, kInstances);
    for (Domain d : kAllDomains)
      for (int k = 0; k < c.instances_per_domain; ++k) {
        const Tensor* distractor = nullptr;
        if (d == Domain::L) {
          std::size_t j = std::uniform_int_distribution<std::size_t>(0, P - 2)(rng);
          if (j >= i) ++j;
          distractor = &products[j].prototype;
        }
        per_product[i].push_back(render_domain_instance(products[i], d, k, c, rng, distractor));
      }
  };
  const auto workers = static_cast<std::size_t>(std::clamp(threads, 1, 64));
  if (workers == 1) {
    for (std::size_t i = 0; i < P; ++i) render(i);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < P; i += workers) render(i);
      });
    for (auto& th : pool) th.join();
  }

  // Split by product.
  std::vector<std::size_t> order(P);
  for (std::size_t i = 0; i < P; ++i) order[i] = i;
  auto split_rng = product_stream(c.seed, kBaseIndex, kSplit);
  std::shuffle(order.begin(), order.end(), split_rng);
  auto n_test = static_cast<std::size_t>(std::llround(c.test_fraction * double(P)));
  if (c.test_fraction > 0) n_test = std::clamp<std::size_t>(n_test, 1, P - 1);
  std::vector<bool> is_test(P, false);
  for (std::size_t i = 0; i < n_test; ++i) is_test[order[i]] = true;

  SynthDataset ds;
  for (std::size_t i = 0; i < P; ++i) {
    ds.truth.push_back(products[i].truth);
    auto& dst = is_test[i] ? ds.test : ds.train;
    for (auto& inst : per_product[i]) dst.push_back(std::move(inst));
  }
  return ds;
}

SynthDataset generate_dataset(const SynthConfig& c, const fs::path& dir, int threads) {
  SynthDataset ds = generate(c, threads);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create " + dir.string() + ": " + ec.message());
  save_dataset(ds.train, dir / "train.jsonl");
  save_dataset(ds.test, dir / "test.jsonl");
  save_ground_truth(ds.truth, dir / "ground_truth.jsonl");
  return ds;
}

void save_ground_truth(const std::vector<ProductTruth>& truth, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& t : truth)
    out << json{{"product_id", t.product_id}, {"true_name", t.true_name}, {"true_attributes", t.true_attributes}}
               .dump()
        << '\n';
  if (!out) throw DataError("write failed: " + path.string());
}

std::vector<ProductTruth> load_ground_truth(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open ground truth: " + path.string());
  std::vector<ProductTruth> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      out.push_back({j.at("product_id").get<std::string>(), j.at("true_name").get<std::string>(),
                     j.at("true_attributes").get<std::vector<std::string>>()});
    } catch (const json::exception& e) {
      throw DataError("bad ground truth at line " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace ampere::synthgen
