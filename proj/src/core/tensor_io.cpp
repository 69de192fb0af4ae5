#include "ampere/core/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <functional>
#include <numeric>

#include "ampere/core/error.hpp"

namespace ampere {
namespace {

constexpr char kMagic[4] = {'A', 'M', 'P', 'T'};
constexpr std::uint32_t kMaxRank = 16;

static_assert(std::endian::native == std::endian::little,
              "tensor I/O assumes a little-endian host");

void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) {
    throw DataError("tensor: unexpected end of file");
  }
  return v;
}

}  // namespace

Tensor::Tensor(std::vector<std::uint32_t> dims)
    : shape(std::move(dims)), data(numel(), 0.0f) {}

std::size_t Tensor::numel() const {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

void write_tensor(std::ostream& out, const Tensor& t) {
  if (t.data.size() != t.numel()) {
    throw UsageError("tensor: payload size does not match shape");
  }
  out.write(kMagic, 4);
  write_u32(out, static_cast<std::uint32_t>(t.rank()));
  for (auto d : t.shape) write_u32(out, d);
  out.write(reinterpret_cast<const char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * sizeof(float)));
}

Tensor read_tensor(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4)) throw DataError("tensor: unexpected end of file");
  if (std::memcmp(magic, kMagic, 4) != 0) throw DataError("tensor: bad magic");
  std::uint32_t rank = read_u32(in);
  if (rank > kMaxRank) throw DataError("tensor: rank too large");
  Tensor t;
  t.shape.resize(rank);
  for (auto& d : t.shape) d = read_u32(in);
  t.data.resize(t.numel());
  if (!in.read(reinterpret_cast<char*>(t.data.data()),
               static_cast<std::streamsize>(t.data.size() * sizeof(float)))) {
    throw DataError("tensor: unexpected end of file");
  }
  return t;
}

void save_tensor(const std::filesystem::path& path, const Tensor& t) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  write_tensor(out, t);
  if (!out) throw DataError("write failed: " + path.string());
}

Tensor load_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("missing tensor file: " + path.string());
  try {
    return read_tensor(in);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace ampere
