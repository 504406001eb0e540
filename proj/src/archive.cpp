#include "tokinsight/archive.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <set>

#include "json.hpp"
#include "tokinsight/error.hpp"

namespace tokinsight {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr std::size_t kPreambleSize = 4 + 8;

void put_u64_le(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_u64_le(const std::uint8_t* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

void put_f32_le(std::vector<std::uint8_t>& out, float f) {
    const auto bits = std::bit_cast<std::uint32_t>(f);
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

float get_f32_le(const std::uint8_t* p) {
    std::uint32_t bits = 0;
    for (int i = 3; i >= 0; --i) bits = (bits << 8) | p[i];
    return std::bit_cast<float>(bits);
}

[[noreturn]] void malformed(const std::string& what) {
    throw Error(ErrorCode::MalformedHeader, "malformed archive header: " + what);
}

ArchiveEntry parse_entry(const std::string& name, const ordered_json& spec) {
    if (name.empty()) malformed("empty tensor name");
    if (!spec.is_object()) malformed("entry '" + name + "' is not an object");
    for (const char* field : {"shape", "offset", "nbytes"}) {
        if (!spec.contains(field)) malformed("entry '" + name + "' lacks \"" + field + "\"");
    }
    const auto& shape = spec["shape"];
    if (!shape.is_array() || shape.empty()) malformed("entry '" + name + "' has no shape dimensions");
    ArchiveEntry entry;
    entry.name = name;
    for (const auto& d : shape) {
        if (!d.is_number_unsigned() || d.get<std::uint64_t>() == 0) {
            malformed("entry '" + name + "' has a non-positive or non-integer dimension");
        }
        entry.shape.push_back(d.get<std::size_t>());
    }
    if (!spec["offset"].is_number_unsigned() || !spec["nbytes"].is_number_unsigned()) {
        malformed("entry '" + name + "' has a non-integer offset or nbytes");
    }
    entry.offset = spec["offset"].get<std::uint64_t>();
    entry.nbytes = spec["nbytes"].get<std::uint64_t>();
    if (entry.nbytes != 4 * shape_numel(entry.shape)) {
        malformed("entry '" + name + "' declares nbytes " + std::to_string(entry.nbytes) + " but shape " +
                  shape_to_string(entry.shape) + " needs " + std::to_string(4 * shape_numel(entry.shape)));
    }
    return entry;
}

}  // namespace

std::vector<std::uint8_t> encode_archive(const NamedTensors& tensors) {
    ordered_json header = ordered_json::object();
    std::set<std::string> seen;
    std::uint64_t offset = 0;
    for (const auto& [name, tensor] : tensors) {
        if (name.empty()) throw Error(ErrorCode::InvalidArgument, "archive tensor names must be non-empty");
        if (!seen.insert(name).second) throw Error(ErrorCode::DuplicateName, "duplicate tensor name '" + name + "'");
        const std::uint64_t nbytes = 4 * tensor.size();
        header[name] = {{"shape", tensor.shape()}, {"offset", offset}, {"nbytes", nbytes}};
        offset += nbytes;
    }
    const std::string text = header.dump();

    std::vector<std::uint8_t> out;
    out.reserve(kPreambleSize + text.size() + offset);
    out.insert(out.end(), std::begin(kArchiveMagic), std::end(kArchiveMagic));
    put_u64_le(out, text.size());
    out.insert(out.end(), text.begin(), text.end());
    for (const auto& [name, tensor] : tensors) {
        for (float v : tensor.data()) put_f32_le(out, v);
    }
    return out;
}

void write_archive(const NamedTensors& tensors, const std::filesystem::path& path) {
    const auto bytes = encode_archive(tensors);
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "' for writing");
    file.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!file) throw Error(ErrorCode::Io, "failed writing '" + path.string() + "'");
}

void write_archive(const TensorMap& tensors, const std::filesystem::path& path) {
    write_archive(NamedTensors(tensors.begin(), tensors.end()), path);
}

std::vector<ArchiveEntry> decode_archive_index(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 4 || !std::equal(std::begin(kArchiveMagic), std::end(kArchiveMagic), bytes.begin())) {
        throw Error(ErrorCode::BadMagic, "not a TNSA archive (bad magic bytes)");
    }
    if (bytes.size() < kPreambleSize) throw Error(ErrorCode::Truncated, "archive truncated inside the header length");
    const std::uint64_t header_len = get_u64_le(bytes.data() + 4);
    if (header_len > bytes.size() - kPreambleSize) {
        throw Error(ErrorCode::Truncated, "archive header length " + std::to_string(header_len) + " exceeds file size");
    }
    const std::string text(bytes.begin() + kPreambleSize, bytes.begin() + kPreambleSize + header_len);
    ordered_json header;
    try {
        header = ordered_json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        malformed(e.what());
    }
    if (!header.is_object()) malformed("top level is not an object");

    const std::uint64_t payload_size = bytes.size() - kPreambleSize - header_len;
    std::vector<ArchiveEntry> entries;
    for (const auto& [name, spec] : header.items()) {
        auto entry = parse_entry(name, spec);
        if (entry.offset > payload_size || entry.nbytes > payload_size - entry.offset) {
            throw Error(ErrorCode::Truncated, "tensor '" + name + "' extends past the end of the payload (needs " +
                                                  std::to_string(entry.offset + entry.nbytes) + " bytes, have " +
                                                  std::to_string(payload_size) + ")");
        }
        entries.push_back(std::move(entry));
    }

    std::vector<const ArchiveEntry*> by_offset;
    for (const auto& e : entries) by_offset.push_back(&e);
    std::sort(by_offset.begin(), by_offset.end(), [](auto* a, auto* b) { return a->offset < b->offset; });
    for (std::size_t i = 1; i < by_offset.size(); ++i) {
        const auto* prev = by_offset[i - 1];
        if (prev->offset + prev->nbytes > by_offset[i]->offset) {
            throw Error(ErrorCode::OverlappingRanges,
                        "tensors '" + prev->name + "' and '" + by_offset[i]->name + "' overlap in the payload");
        }
    }
    return entries;
}

TensorMap decode_archive(const std::vector<std::uint8_t>& bytes) {
    const auto entries = decode_archive_index(bytes);
    const std::uint8_t* payload = bytes.data() + kPreambleSize + get_u64_le(bytes.data() + 4);
    TensorMap out;
    for (const auto& e : entries) {
        std::vector<float> data(e.nbytes / 4);
        const std::uint8_t* src = payload + e.offset;
        for (std::size_t i = 0; i < data.size(); ++i) data[i] = get_f32_le(src + 4 * i);
        out.emplace(e.name, Tensor(e.shape, std::move(data)));
    }
    return out;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());
    if (file.bad()) throw Error(ErrorCode::Io, "failed reading '" + path.string() + "'");
    return bytes;
}

std::vector<ArchiveEntry> read_archive_index(const std::filesystem::path& path) {
    return decode_archive_index(read_file_bytes(path));
}

TensorMap read_archive(const std::filesystem::path& path) {
    return decode_archive(read_file_bytes(path));
}

}  // namespace tokinsight
