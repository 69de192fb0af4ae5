#pragma once

#include <filesystem>
#include <vector>

#include "ampere/core/types.hpp"

namespace ampere {

inline constexpr double kEmbeddingNormTolerance = 1e-4;

// JSONL {product_id, instance_id, domain, vector}. Vectors round-trip at
// float32 precision.
void save_embeddings(const std::vector<EmbeddingRecord>& records,
                     const std::filesystem::path& path);
std::vector<EmbeddingRecord> load_embeddings(const std::filesystem::path& path);

}  // namespace ampere
