#pragma once

#include <filesystem>
#include <vector>

#include "ampere/core/types.hpp"

namespace ampere {

// Reads a JSON-Lines manifest. Each line carries product_id, instance_id,
// domain, frames_file (relative to the manifest directory) and raw_text.
// Errors carry the 1-based line number.
std::vector<ProductInstance> load_dataset(const std::filesystem::path& manifest);

// Writes the manifest plus one frame tensor per instance under
// `<manifest dir>/<frames_dir>/<instance_id>.ampt`.
void save_dataset(const std::vector<ProductInstance>& instances,
                  const std::filesystem::path& manifest,
                  const std::string& frames_dir = "frames");

}  // namespace ampere
