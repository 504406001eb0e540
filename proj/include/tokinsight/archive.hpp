#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "tokinsight/tensor.hpp"

namespace tokinsight {

// TNSA tensor archive:
//
//   "TNSA" | u64 LE header length | UTF-8 JSON header | payload
//
// The header maps each name to {"shape":[...],"offset":o,"nbytes":n}, offsets
// relative to the payload start. Payload values are little-endian float32.

using TensorMap = std::map<std::string, Tensor>;
using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

struct ArchiveEntry {
    std::string name;
    Shape shape;
    std::uint64_t offset = 0;
    std::uint64_t nbytes = 0;
};

inline constexpr char kArchiveMagic[4] = {'T', 'N', 'S', 'A'};

/// Serializes tensors in the given order. Throws DuplicateName, InvalidArgument
/// (empty name) or Io.
std::vector<std::uint8_t> encode_archive(const NamedTensors& tensors);
void write_archive(const NamedTensors& tensors, const std::filesystem::path& path);
void write_archive(const TensorMap& tensors, const std::filesystem::path& path);

/// Header entries in file order. Validates the whole layout.
std::vector<ArchiveEntry> decode_archive_index(const std::vector<std::uint8_t>& bytes);
TensorMap decode_archive(const std::vector<std::uint8_t>& bytes);

std::vector<ArchiveEntry> read_archive_index(const std::filesystem::path& path);
TensorMap read_archive(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

}  // namespace tokinsight
