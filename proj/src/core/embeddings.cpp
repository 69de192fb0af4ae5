#include "ampere/core/embeddings.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "ampere/core/error.hpp"
#include "json.hpp"

namespace ampere {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

double l2_norm(const std::vector<float>& v) {
  double s = 0.0;
  for (float x : v) s += static_cast<double>(x) * x;
  return std::sqrt(s);
}

void check_record(const EmbeddingRecord& r, const std::string& where) {
  if (r.vector.empty()) throw DataError("empty embedding vector " + where);
  for (float x : r.vector) {
    if (!std::isfinite(x)) throw DataError("non-finite embedding value " + where);
  }
  const double n = l2_norm(r.vector);
  if (std::abs(n - 1.0) > kEmbeddingNormTolerance) {
    throw DataError("embedding norm " + std::to_string(n) +
                    " deviates from 1 " + where + " (corrupt file?)");
  }
}

}  // namespace

void save_embeddings(const std::vector<EmbeddingRecord>& records,
                     const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  for (const auto& r : records) {
    check_record(r, "for instance " + r.instance_id);
    json j = {{"product_id", r.product_id},
              {"instance_id", r.instance_id},
              {"domain", std::string(to_string(r.domain))},
              {"vector", r.vector}};
    out << j.dump() << '\n';
  }
  if (!out) throw DataError("write failed: " + path.string());
}

std::vector<EmbeddingRecord> load_embeddings(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open embeddings file: " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string content = buf.str();

  std::vector<EmbeddingRecord> out;
  std::size_t pos = 0;
  std::size_t line = 0;
  while (pos < content.size()) {
    ++line;
    const std::size_t nl = content.find('\n', pos);
    if (nl == std::string::npos) {
      // Every record is newline-terminated; a dangling tail is a cut write.
      throw DataError("unexpected end of file at line " + std::to_string(line));
    }
    const std::string text = content.substr(pos, nl - pos);
    pos = nl + 1;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "at line " + std::to_string(line);
    EmbeddingRecord r;
    try {
      const json j = json::parse(text);
      r.product_id = j.at("product_id").get<std::string>();
      r.instance_id = j.at("instance_id").get<std::string>();
      r.domain = parse_domain(j.at("domain").get<std::string>());
      r.vector = j.at("vector").get<std::vector<float>>();
    } catch (const json::exception& e) {
      throw DataError("malformed embedding record " + where + ": " + e.what());
    }
    check_record(r, where);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace ampere
