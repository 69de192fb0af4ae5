#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

namespace ampere {

// Dense row-major float32 tensor.
struct Tensor {
  std::vector<std::uint32_t> shape;
  std::vector<float> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::uint32_t> dims);

  std::size_t numel() const;
  std::size_t rank() const { return shape.size(); }

  bool operator==(const Tensor&) const = default;
};

// "AMPT" container: magic, u32 LE rank, rank u32 LE dims, f32 LE payload.
void write_tensor(std::ostream& out, const Tensor& t);
Tensor read_tensor(std::istream& in);

void save_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor load_tensor(const std::filesystem::path& path);

}  // namespace ampere
