#include "ampere/evaluation/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_map>

#include "ampere/core/error.hpp"
#include "ampere/textproc/summarizer.hpp"

namespace ampere {

std::string_view to_string(Task t) {
  switch (t) {
    case Task::P2S: return "P2S";
    case Task::P2L: return "P2L";
    case Task::S2P: return "S2P";
    case Task::S2L: return "S2L";
    case Task::L2P: return "L2P";
    case Task::L2S: return "L2S";
  }
  return "?";
}

Task parse_task(std::string_view s) {
  for (Task t : kAllTasks)
    if (to_string(t) == s) return t;
  throw UsageError("unknown task '" + std::string(s) + "'");
}

Domain query_domain(Task t) { return parse_domain(to_string(t).substr(0, 1)); }
Domain gallery_domain(Task t) { return parse_domain(to_string(t).substr(2, 1)); }

SimilarityMatrix similarity_matrix(const std::vector<EmbeddingRecord>& queries,
                                   const std::vector<EmbeddingRecord>& gallery) {
  if (queries.empty() || gallery.empty())
    throw UsageError("similarity_matrix: empty query or gallery set");
  const std::size_t d = queries.front().vector.size();
  auto pack = [d](const std::vector<EmbeddingRecord>& recs) {
    nn::Matrix m(static_cast<Eigen::Index>(recs.size()), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < recs.size(); ++i) {
      if (recs[i].vector.size() != d)
        throw UsageError("similarity_matrix: embedding width mismatch at " + recs[i].instance_id);
      for (std::size_t j = 0; j < d; ++j) m(i, j) = recs[i].vector[j];
    }
    return m;
  };
  SimilarityMatrix out;
  out.scores = pack(queries) * pack(gallery).transpose();
  for (const auto& r : queries) out.query_products.push_back(r.product_id);
  for (const auto& r : gallery) out.gallery_products.push_back(r.product_id);
  return out;
}

std::vector<std::size_t> rank_gallery(const std::vector<double>& scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

namespace {

// 0-based position of the first relevant item, or ranking.size().
std::size_t first_relevant(const std::vector<std::size_t>& ranking, const std::vector<bool>& relevant) {
  for (std::size_t i = 0; i < ranking.size(); ++i)
    if (relevant.at(ranking[i])) return i;
  return ranking.size();
}

}  // namespace

double recall_at_k(const std::vector<std::size_t>& ranking, const std::vector<bool>& relevant, int k) {
  if (k < 1) throw UsageError("recall_at_k: k must be >= 1");
  return first_relevant(ranking, relevant) < static_cast<std::size_t>(k) ? 1.0 : 0.0;
}

double reciprocal_rank(const std::vector<std::size_t>& ranking, const std::vector<bool>& relevant) {
  const std::size_t pos = first_relevant(ranking, relevant);
  return pos == ranking.size() ? 0.0 : 1.0 / static_cast<double>(pos + 1);
}

double ndcg_at_10(const std::vector<std::size_t>& ranking, const std::vector<bool>& relevant) {
  const std::size_t n = std::min<std::size_t>(10, ranking.size());
  double dcg = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (relevant.at(ranking[i])) dcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  const auto total = static_cast<std::size_t>(std::count(relevant.begin(), relevant.end(), true));
  double idcg = 0;
  for (std::size_t i = 0; i < std::min(n, total); ++i) idcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  return idcg > 0 ? dcg / idcg : 0.0;
}

TaskMetrics evaluate_task(const std::vector<EmbeddingRecord>& queries,
                          const std::vector<EmbeddingRecord>& gallery) {
  const SimilarityMatrix sim = similarity_matrix(queries, gallery);
  TaskMetrics m;
  m.gallery = gallery.size();
  std::vector<double> row(gallery.size());
  std::vector<bool> relevant(gallery.size());
  for (std::size_t q = 0; q < queries.size(); ++q) {
    bool any = false;
    for (std::size_t g = 0; g < gallery.size(); ++g) {
      row[g] = sim.scores(q, g);
      if (!std::isfinite(row[g]))
        throw DataError("non-finite similarity for query " + queries[q].instance_id);
      relevant[g] = sim.gallery_products[g] == sim.query_products[q];
      any = any || relevant[g];
    }
    if (!any) {
      ++m.excluded_queries;
      continue;
    }
    const auto ranking = rank_gallery(row);
    const double h1 = recall_at_k(ranking, relevant, 1);
    m.r1 += h1;
    m.r5 += recall_at_k(ranking, relevant, 5);
    m.r10 += recall_at_k(ranking, relevant, 10);
    m.mrr += reciprocal_rank(ranking, relevant);
    m.ndcg10 += ndcg_at_10(ranking, relevant);
    m.query_ids.push_back(queries[q].instance_id);
    m.hit_at_1.push_back(h1 > 0);
    ++m.queries;
  }
  if (m.queries > 0) {
    const auto n = static_cast<double>(m.queries);
    m.r1 *= 100.0 / n;
    m.r5 *= 100.0 / n;
    m.r10 *= 100.0 / n;
    m.mrr /= n;
    m.ndcg10 /= n;
  }
  if (!(m.r1 <= m.r5 && m.r5 <= m.r10 && m.r10 <= 100.0))
    throw DataError("recall not monotone in k");
  return m;
}

namespace {

std::size_t histogram_bin(double dist) {
  const double clamped = std::clamp(dist, 0.0, 2.0);
  return std::min(kHistogramBins - 1, static_cast<std::size_t>(clamped / kHistogramBinWidth));
}

std::vector<double> unit_rows(const std::vector<EmbeddingRecord>& records, std::size_t& d) {
  d = records.front().vector.size();
  std::vector<double> out(records.size() * d);
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].vector.size() != d) throw UsageError("distance_stats: embedding width mismatch");
    double n = 0;
    for (float x : records[i].vector) n += double(x) * x;
    n = std::sqrt(n);
    for (std::size_t j = 0; j < d; ++j) out[i * d + j] = n > 0 ? records[i].vector[j] / n : 0.0;
  }
  return out;
}

}  // namespace

DistanceStats distance_stats(const std::vector<EmbeddingRecord>& records, std::size_t pair_cap,
                             std::uint64_t seed) {
  std::map<std::string, std::size_t> per_product;
  for (const auto& r : records) ++per_product[r.product_id];
  if (per_product.size() < 2) throw UsageError("distance_stats: needs at least two products");
  std::size_t d = 0;
  const std::vector<double> u = unit_rows(records, d);
  auto dist = [&](std::size_t i, std::size_t j) {
    double s = 0;
    for (std::size_t k = 0; k < d; ++k) s += u[i * d + k] * u[j * d + k];
    return 1.0 - s;
  };

  DistanceStats st;
  st.intra_histogram.assign(kHistogramBins, 0);
  st.inter_histogram.assign(kHistogramBins, 0);
  for (const auto& [_, n] : per_product)
    if (n == 1) ++st.singleton_products;

  std::size_t intra_total = 0;
  for (const auto& [_, n] : per_product) intra_total += n * (n - 1) / 2;
  const std::size_t all = records.size() * (records.size() - 1) / 2;
  const std::size_t inter_total = all - intra_total;

  double intra_sum = 0, inter_sum = 0;
  const bool exact = inter_total <= pair_cap;
  for (std::size_t i = 0; i < records.size(); ++i)
    for (std::size_t j = i + 1; j < records.size(); ++j) {
      const bool same = records[i].product_id == records[j].product_id;
      if (!same && !exact) continue;
      const double x = dist(i, j);
      if (same) {
        intra_sum += x;
        ++st.intra_pairs;
        ++st.intra_histogram[histogram_bin(x)];
      } else {
        inter_sum += x;
        ++st.inter_pairs;
        ++st.inter_histogram[histogram_bin(x)];
      }
    }
  if (!exact) {
    st.inter_sampled = true;
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, records.size() - 1);
    while (st.inter_pairs < pair_cap) {
      const std::size_t i = pick(rng), j = pick(rng);
      if (records[i].product_id == records[j].product_id) continue;
      const double x = dist(i, j);
      inter_sum += x;
      ++st.inter_pairs;
      ++st.inter_histogram[histogram_bin(x)];
    }
  }
  if (st.intra_pairs > 0) st.intra_mean = intra_sum / static_cast<double>(st.intra_pairs);
  if (st.inter_pairs > 0) st.inter_mean = inter_sum / static_cast<double>(st.inter_pairs);
  return st;
}

std::vector<SignalRow> signal_report(const std::vector<SummaryRecord>& summaries,
                                     const std::vector<bool>& hit_at_1) {
  if (summaries.size() != hit_at_1.size())
    throw UsageError("signal_report: summaries and outcomes differ in length");
  std::vector<SignalRow> rows(textproc::kSignalBuckets.size());
  std::vector<std::size_t> hits(rows.size(), 0);
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i].bucket = textproc::kSignalBuckets[i];
  for (std::size_t q = 0; q < summaries.size(); ++q) {
    const double level = summaries[q].status == SummaryStatus::ok ? summaries[q].signal_level : 0.0;
    const std::size_t b = textproc::signal_bucket_index(level);
    ++rows[b].queries;
    if (hit_at_1[q]) ++hits[b];
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].queries == 0) continue;
    rows[i].percentage = 100.0 * static_cast<double>(rows[i].queries) / static_cast<double>(summaries.size());
    rows[i].r1 = 100.0 * static_cast<double>(hits[i]) / static_cast<double>(rows[i].queries);
  }
  return rows;
}

EvalReport evaluate_all(const std::vector<EmbeddingRecord>& records, const EvalOptions& options) {
  std::array<std::vector<EmbeddingRecord>, 3> by_domain;
  for (const auto& r : records) by_domain[static_cast<std::size_t>(r.domain)].push_back(r);
  if (options.tasks.empty()) throw UsageError("evaluate_all: no tasks selected");

  EvalReport report;
  double r1_sum = 0;
  for (Task t : options.tasks) {
    const auto& q = by_domain[static_cast<std::size_t>(query_domain(t))];
    const auto& g = by_domain[static_cast<std::size_t>(gallery_domain(t))];
    if (q.empty() || g.empty())
      throw DataError(std::string("evaluate_all: task ") + std::string(to_string(t)) +
                      " lacks query or gallery embeddings");
    TaskMetrics m = evaluate_task(q, g);
    r1_sum += m.r1;
    if (options.summaries && query_domain(t) != Domain::P) {
      std::vector<SummaryRecord> sums;
      sums.reserve(m.query_ids.size());
      for (const auto& id : m.query_ids) {
        auto it = options.summaries->find(id);
        if (it == options.summaries->end()) throw DataError("no summary for query " + id);
        sums.push_back(it->second);
      }
      report.signal[t] = signal_report(sums, m.hit_at_1);
    }
    report.tasks[t] = std::move(m);
  }
  report.mr1 = r1_sum / static_cast<double>(options.tasks.size());
  if (options.distances) report.distances = distance_stats(records, options.pair_cap, options.seed);
  return report;
}

nlohmann::json report_json(const EvalReport& report) {
  using nlohmann::json;
  json j;
  json tasks = json::object();
  for (const auto& [t, m] : report.tasks)
    tasks[std::string(to_string(t))] = {{"R1", m.r1},         {"R5", m.r5},
                                        {"R10", m.r10},       {"MRR", m.mrr},
                                        {"NDCG10", m.ndcg10}, {"queries", m.queries},
                                        {"excluded_queries", m.excluded_queries},
                                        {"gallery", m.gallery}};
  j["tasks"] = tasks;
  j["mR1"] = report.mr1;
  if (report.distances) {
    const auto& d = *report.distances;
    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    j["distance_stats"] = {{"intra_mean", opt(d.intra_mean)},
                           {"inter_mean", opt(d.inter_mean)},
                           {"intra_pairs", d.intra_pairs},
                           {"inter_pairs", d.inter_pairs},
                           {"inter_sampled", d.inter_sampled},
                           {"singleton_products", d.singleton_products},
                           {"bin_width", kHistogramBinWidth},
                           {"intra_histogram", d.intra_histogram},
                           {"inter_histogram", d.inter_histogram}};
  }
  if (!report.signal.empty()) {
    json sig = json::object();
    for (const auto& [t, rows] : report.signal) {
      json arr = json::array();
      for (const auto& r : rows)
        arr.push_back({{"bucket", r.bucket},
                       {"queries", r.queries},
                       {"percentage", r.percentage},
                       {"R1", r.r1 ? json(*r.r1) : json(nullptr)}});
      sig[std::string(to_string(t))] = arr;
    }
    j["signal_table"] = sig;
  }
  return j;
}

EvalReport report_from_json(const nlohmann::json& j) {
  EvalReport r;
  auto opt = [](const nlohmann::json& v) { return v.is_null() ? std::optional<double>{} : v.get<double>(); };
  try {
    for (const auto& [key, m] : j.at("tasks").items()) {
      TaskMetrics t;
      t.r1 = m.at("R1").get<double>();
      t.r5 = m.at("R5").get<double>();
      t.r10 = m.at("R10").get<double>();
      t.mrr = m.at("MRR").get<double>();
      t.ndcg10 = m.at("NDCG10").get<double>();
      t.queries = m.at("queries").get<std::size_t>();
      t.excluded_queries = m.at("excluded_queries").get<std::size_t>();
      t.gallery = m.at("gallery").get<std::size_t>();
      r.tasks[parse_task(key)] = t;
    }
    r.mr1 = j.at("mR1").get<double>();
    if (j.contains("distance_stats")) {
      const auto& d = j.at("distance_stats");
      DistanceStats st;
      st.intra_mean = opt(d.at("intra_mean"));
      st.inter_mean = opt(d.at("inter_mean"));
      st.intra_pairs = d.at("intra_pairs").get<std::size_t>();
      st.inter_pairs = d.at("inter_pairs").get<std::size_t>();
      st.inter_sampled = d.at("inter_sampled").get<bool>();
      st.singleton_products = d.at("singleton_products").get<std::size_t>();
      st.intra_histogram = d.at("intra_histogram").get<std::vector<std::size_t>>();
      st.inter_histogram = d.at("inter_histogram").get<std::vector<std::size_t>>();
      r.distances = st;
    }
    if (j.contains("signal_table")) {
      for (const auto& [key, rows] : j.at("signal_table").items()) {
        auto& out = r.signal[parse_task(key)];
        for (const auto& row : rows)
          out.push_back({row.at("bucket").get<std::string>(), row.at("queries").get<std::size_t>(),
                         row.at("percentage").get<double>(), opt(row.at("R1"))});
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed report: ") + e.what());
  } catch (const UsageError& e) {
    throw DataError(std::string("malformed report: ") + e.what());
  }
  return r;
}

std::string report_text(const EvalReport& report) {
  std::ostringstream os;
  os << std::fixed;
  os << std::left << std::setw(6) << "task" << std::right << std::setw(8) << "R1" << std::setw(8) << "R5"
     << std::setw(8) << "R10" << std::setw(8) << "MRR" << std::setw(8) << "NDCG10" << std::setw(9)
     << "queries" << std::setw(10) << "excluded" << '\n';
  for (const auto& [t, m] : report.tasks)
    os << std::left << std::setw(6) << to_string(t) << std::right << std::setprecision(1) << std::setw(8)
       << m.r1 << std::setw(8) << m.r5 << std::setw(8) << m.r10 << std::setprecision(3) << std::setw(8)
       << m.mrr << std::setw(8) << m.ndcg10 << std::setw(9) << m.queries << std::setw(10)
       << m.excluded_queries << '\n';
  os << std::left << std::setw(6) << "mR1" << std::right << std::setprecision(1) << std::setw(8)
     << report.mr1 << '\n';
  if (report.distances) {
    const auto& d = *report.distances;
    os << "\nintra-product distance: ";
    if (d.intra_mean) os << std::setprecision(4) << *d.intra_mean; else os << "n/a";
    os << " (" << d.intra_pairs << " pairs)\ninter-product distance: ";
    if (d.inter_mean) os << std::setprecision(4) << *d.inter_mean; else os << "n/a";
    os << " (" << d.inter_pairs << (d.inter_sampled ? " sampled" : "") << " pairs)\n";
    if (d.singleton_products) os << "single-instance products: " << d.singleton_products << '\n';
  }
  for (const auto& [t, rows] : report.signal) {
    os << '\n' << to_string(t) << " by signal level\n";
    os << std::left << std::setw(20) << "bucket" << std::right << std::setw(10) << "percent" << std::setw(8)
       << "R1" << '\n';
    for (const auto& r : rows) {
      os << std::left << std::setw(20) << r.bucket << std::right << std::setprecision(1) << std::setw(10)
         << r.percentage << std::setw(8);
      if (r.r1) os << *r.r1; else os << "n/a";
      os << '\n';
    }
  }
  return os.str();
}

std::string report_csv(const EvalReport& report) {
  std::ostringstream os;
  os << std::setprecision(10) << "task,R1,R5,R10,MRR,NDCG10,queries,excluded\n";
  for (const auto& [t, m] : report.tasks)
    os << to_string(t) << ',' << m.r1 << ',' << m.r5 << ',' << m.r10 << ',' << m.mrr << ',' << m.ndcg10 << ','
       << m.queries << ',' << m.excluded_queries << '\n';
  return os.str();
}

void write_histogram_csv(const DistanceStats& stats, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "bin_start,bin_end,intra,inter\n";
  for (std::size_t i = 0; i < kHistogramBins; ++i)
    out << i * kHistogramBinWidth << ',' << (i + 1) * kHistogramBinWidth << ',' << stats.intra_histogram[i]
        << ',' << stats.inter_histogram[i] << '\n';
}

}  // namespace ampere
