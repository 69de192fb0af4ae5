#include "ampere/core/dataset.hpp"

#include <fstream>
#include <string>

#include "ampere/core/error.hpp"
#include "json.hpp"

namespace ampere {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string field(const json& j, const char* name, std::size_t line) {
  auto it = j.find(name);
  if (it == j.end() || !it->is_string()) {
    throw DataError(std::string("missing string field '") + name + "' at line " +
                    std::to_string(line));
  }
  return it->get<std::string>();
}

}  // namespace

std::vector<ProductInstance> load_dataset(const fs::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw DataError("cannot open manifest: " + manifest.string());
  const fs::path base = manifest.parent_path();

  std::vector<ProductInstance> out;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      throw DataError("malformed JSON at line " + std::to_string(line) + ": " +
                      e.what());
    }
    if (!j.is_object()) {
      throw DataError("malformed JSON at line " + std::to_string(line) +
                      ": expected an object");
    }
    ProductInstance inst;
    inst.product_id = field(j, "product_id", line);
    inst.instance_id = field(j, "instance_id", line);
    inst.raw_text = field(j, "raw_text", line);
    const std::string frames_file = field(j, "frames_file", line);
    try {
      inst.domain = parse_domain(field(j, "domain", line));
      if (inst.product_id.empty()) throw DataError("product_id empty");
      if (inst.instance_id.empty()) throw DataError("instance_id empty");
    } catch (const DataError& e) {
      throw DataError(std::string(e.what()) + " at line " + std::to_string(line));
    }
    inst.frames = load_tensor(base / frames_file);
    try {
      inst.validate();
    } catch (const DataError& e) {
      throw DataError(std::string(e.what()) + " at line " + std::to_string(line));
    }
    out.push_back(std::move(inst));
  }
  return out;
}

void save_dataset(const std::vector<ProductInstance>& instances,
                  const fs::path& manifest, const std::string& frames_dir) {
  const fs::path base = manifest.parent_path();
  fs::create_directories(base / frames_dir);
  std::ofstream out(manifest, std::ios::trunc);
  if (!out) throw DataError("cannot open for writing: " + manifest.string());
  for (const auto& inst : instances) {
    inst.validate();
    const std::string rel = frames_dir + "/" + inst.instance_id + ".ampt";
    save_tensor(base / rel, inst.frames);
    json j = {{"product_id", inst.product_id},
              {"instance_id", inst.instance_id},
              {"domain", std::string(to_string(inst.domain))},
              {"frames_file", rel},
              {"raw_text", inst.raw_text}};
    out << j.dump() << '\n';
  }
  if (!out) throw DataError("write failed: " + manifest.string());
}

}  // namespace ampere
