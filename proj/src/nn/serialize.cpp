#include "figo/nn/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "figo/error.hpp"

namespace figo::nn {
namespace {

constexpr char kMagic[8] = {'F', 'I', 'G', 'O', 'W', 'T', 'S', '1'};

static_assert(std::endian::native == std::endian::little,
              "weight files are written in native little-endian layout");

template <typename T>
void put(std::ofstream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::ifstream& in, const std::filesystem::path& path) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) {
    throw Error(ErrorCode::CorruptCheckpoint, path.string() + ": truncated weight file");
  }
  return value;
}

}  // namespace

void write_weights(const std::filesystem::path& path, const std::vector<const Parameter*>& params) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const Parameter* p : params) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p->name.size()));
    out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    put<std::uint64_t>(out, p->value.size());
    out.write(reinterpret_cast<const char*>(p->value.data()),
              static_cast<std::streamsize>(p->value.size() * sizeof(double)));
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

void read_weights(const std::filesystem::path& path, const std::vector<Parameter*>& params) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingCheckpoint, "cannot open weights " + path.string());
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw Error(ErrorCode::CorruptCheckpoint, path.string() + ": bad weight file magic");
  }
  const auto count = get<std::uint32_t>(in, path);
  if (count != params.size()) {
    throw Error(ErrorCode::CorruptCheckpoint,
                path.string() + ": expected " + std::to_string(params.size()) +
                    " tensors, file has " + std::to_string(count));
  }
  for (Parameter* p : params) {
    const auto name_len = get<std::uint32_t>(in, path);
    if (name_len > 4096) throw Error(ErrorCode::CorruptCheckpoint, path.string() + ": bad name length");
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len)) {
      throw Error(ErrorCode::CorruptCheckpoint, path.string() + ": truncated weight file");
    }
    const auto n = get<std::uint64_t>(in, path);
    if (name != p->name || n != p->value.size()) {
      throw Error(ErrorCode::CorruptCheckpoint,
                  path.string() + ": tensor '" + name + "' does not match '" + p->name + "'");
    }
    if (!in.read(reinterpret_cast<char*>(p->value.data()),
                 static_cast<std::streamsize>(n * sizeof(double)))) {
      throw Error(ErrorCode::CorruptCheckpoint, path.string() + ": truncated weight file");
    }
  }
}

}  // namespace figo::nn
