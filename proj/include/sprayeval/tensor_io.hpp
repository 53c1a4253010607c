#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "sprayeval/tensor.hpp"

namespace sprayeval {

// TNSR layout, all little-endian:
//   0..3 "TNSR" | 4 version=1 | 5 rank (2|3) | 6..7 zero
//   rank x u32 extents | product(extents) x f32
// LMSK uses the same header with magic "LMSK", rank 2 and u8 labels.

std::vector<std::uint8_t> encode_tensor(const Tensor& t);
Tensor decode_tensor(std::span<const std::uint8_t> bytes);

void write_tensor(const Tensor& t, const std::filesystem::path& path);
Tensor read_tensor(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_mask(const LabelMask& m);
LabelMask decode_mask(std::span<const std::uint8_t> bytes, int num_classes = kDatasetClassCount);

void write_mask(const LabelMask& m, const std::filesystem::path& path);
LabelMask read_mask(const std::filesystem::path& path, int num_classes = kDatasetClassCount);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace sprayeval
