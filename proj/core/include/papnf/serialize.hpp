#pragma once

// Single-file container shared by model and backbone checkpoints:
//
//   magic     "PAPNF1\0" (7 bytes)
//   header    u64 length + UTF-8 canonical JSON text
//   body      repeated { u32 name_len, name, u32 rank, u64 dims[rank], f64 values[] }
//   trailer   u32 CRC-32 of the body bytes
//
// All integers and floats are little-endian.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "papnf/params.hpp"

namespace papnf {

inline constexpr char kContainerMagic[7] = {'P', 'A', 'P', 'N', 'F', '1', '\0'};

struct Container {
  std::string header;  // JSON text
  ParameterList tensors;
};

std::vector<std::uint8_t> encode_container(const std::string& header, std::span<const NamedTensor> tensors);
/// Decoded tensors are fresh leaves with requires_grad = false.
Container decode_container(std::span<const std::uint8_t> bytes);

void write_container(const std::filesystem::path& path, const std::string& header,
                     std::span<const NamedTensor> tensors);
Container read_container(const std::filesystem::path& path);

/// Body encoding only (names, shapes, values), as hashed for frozen-weight checks.
std::vector<std::uint8_t> encode_tensors(std::span<const NamedTensor> tensors);

std::uint32_t crc32(std::span<const std::uint8_t> bytes);
std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_hex(const std::string& text);
std::string tensors_sha256(std::span<const NamedTensor> tensors);

}  // namespace papnf
