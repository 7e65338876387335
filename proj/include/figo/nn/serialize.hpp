#pragma once

#include <filesystem>
#include <vector>

#include "figo/nn/tensor.hpp"

namespace figo::nn {

/// Binary weight file: "FIGOWTS1", u32 parameter count, then per parameter
/// (u32 name length, name, u64 element count, little-endian doubles).
void write_weights(const std::filesystem::path& path, const std::vector<const Parameter*>& params);

/// Loads into parameters of matching name and size, in order. Throws
/// CorruptCheckpoint on any mismatch or truncation.
void read_weights(const std::filesystem::path& path, const std::vector<Parameter*>& params);

}  // namespace figo::nn
