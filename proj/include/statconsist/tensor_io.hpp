#pragma once

#include <filesystem>
#include <iosfwd>

#include "statconsist/tensor.hpp"

namespace statconsist {

// Binary layout: "STNS", u32 version (1), u32 rank, u64 dims[rank], f64 payload.
// All integers and floats little-endian.
inline constexpr std::uint32_t kTensorFileVersion = 1;

void write_tensor(std::ostream& os, const Tensor& t);
Tensor read_tensor(std::istream& is);

void save_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor load_tensor(const std::filesystem::path& path);

}  // namespace statconsist
