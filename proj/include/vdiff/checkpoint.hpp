#pragma once

// Binary checkpoint container: magic, version, an embedded config text blob,
// named tensors, and a trailing CRC32 over everything before it.  Layout is
// little-endian; see docs/formats.md.

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "common.hpp"
#include "tensor.hpp"

namespace vdiff {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

inline constexpr std::array<char, 6> kCheckpointMagic = {'V', 'D', 'C', 'K', 'P', 'T'};
inline constexpr u16 kCheckpointVersion = 1;

namespace detail {

inline u32 crc32(const unsigned char* data, size_t len, u32 crc = 0) {
    static const auto table = [] {
        std::array<u32, 256> t{};
        for (u32 i = 0; i < 256; ++i) {
            u32 c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    crc = ~crc;
    for (size_t i = 0; i < len; ++i) crc = table[(crc ^ data[i]) & 0xFFu] ^ (crc >> 8);
    return ~crc;
}

template <class V>
void put(std::vector<unsigned char>& buf, const V& v) {
    const auto* p = reinterpret_cast<const unsigned char*>(&v);
    buf.insert(buf.end(), p, p + sizeof(V));
}

template <class V>
V take(const std::vector<unsigned char>& buf, size_t& pos) {
    check_runtime(pos + sizeof(V) <= buf.size(), "checkpoint: truncated file");
    V v;
    std::memcpy(&v, buf.data() + pos, sizeof(V));
    pos += sizeof(V);
    return v;
}

template <class T>
constexpr u8 dtype_code() {
    if constexpr (std::is_same_v<T, float>) return 1;
    else if constexpr (std::is_same_v<T, double>) return 2;
    else static_assert(sizeof(T) == 0, "unsupported checkpoint dtype");
}

}  // namespace detail

template <class T>
struct CheckpointData {
    std::map<std::string, Tensor<T>> tensors;
    std::string config_text;
};

template <class T>
void save_checkpoint(const std::string& path, const std::map<std::string, Tensor<T>>& tensors,
                     const std::string& config_text) {
    std::vector<unsigned char> buf;
    buf.insert(buf.end(), kCheckpointMagic.begin(), kCheckpointMagic.end());
    detail::put(buf, kCheckpointVersion);
    detail::put(buf, u32(config_text.size()));
    buf.insert(buf.end(), config_text.begin(), config_text.end());
    detail::put(buf, u32(tensors.size()));
    for (const auto& [name, tensor] : tensors) {
        check_arg(name.size() <= 0xFFFF, "checkpoint: tensor name too long: " + name);
        detail::put(buf, u16(name.size()));
        buf.insert(buf.end(), name.begin(), name.end());
        detail::put(buf, detail::dtype_code<T>());
        check_arg(tensor.rank() <= 0xFF, "checkpoint: tensor rank too large");
        detail::put(buf, u8(tensor.rank()));
        for (i64 d = 0; d < tensor.rank(); ++d) detail::put(buf, u32(tensor.dim(d)));
        const auto* p = reinterpret_cast<const unsigned char*>(tensor.data());
        buf.insert(buf.end(), p, p + size_t(tensor.size()) * sizeof(T));
    }
    detail::put(buf, detail::crc32(buf.data(), buf.size()));

    std::ofstream out(path, std::ios::binary);
    check_runtime(out.good(), "checkpoint: cannot open " + path + " for writing");
    out.write(reinterpret_cast<const char*>(buf.data()), std::streamsize(buf.size()));
    check_runtime(out.good(), "checkpoint: write failed for " + path);
}

// Fully validates before returning; a bad file never yields partial state.
template <class T>
CheckpointData<T> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    check_runtime(in.good(), "checkpoint: cannot open " + path);
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());

    check_runtime(buf.size() >= kCheckpointMagic.size() + sizeof(u16) + sizeof(u32),
                  "checkpoint: file too small");
    check_runtime(std::memcmp(buf.data(), kCheckpointMagic.data(), kCheckpointMagic.size()) == 0,
                  "checkpoint: bad magic (not a checkpoint file)");

    const u32 stored_crc = [&] {
        u32 v;
        std::memcpy(&v, buf.data() + buf.size() - sizeof(u32), sizeof(u32));
        return v;
    }();
    const u32 actual_crc = detail::crc32(buf.data(), buf.size() - sizeof(u32));
    check_runtime(stored_crc == actual_crc, "checkpoint: CRC mismatch (corrupt file)");

    size_t pos = kCheckpointMagic.size();
    const u16 version = detail::take<u16>(buf, pos);
    check_runtime(version == kCheckpointVersion,
                  "checkpoint: unsupported version " + std::to_string(version));

    CheckpointData<T> data;
    const u32 cfg_len = detail::take<u32>(buf, pos);
    check_runtime(pos + cfg_len <= buf.size(), "checkpoint: truncated config block");
    data.config_text.assign(reinterpret_cast<const char*>(buf.data() + pos), cfg_len);
    pos += cfg_len;

    const u32 count = detail::take<u32>(buf, pos);
    for (u32 i = 0; i < count; ++i) {
        const u16 name_len = detail::take<u16>(buf, pos);
        check_runtime(pos + name_len <= buf.size(), "checkpoint: truncated tensor name");
        std::string name(reinterpret_cast<const char*>(buf.data() + pos), name_len);
        pos += name_len;
        const u8 dtype = detail::take<u8>(buf, pos);
        check_runtime(dtype == detail::dtype_code<T>(),
                      "checkpoint: dtype mismatch for tensor " + name);
        const u8 rank = detail::take<u8>(buf, pos);
        Shape shape;
        i64 size = 1;
        for (u8 d = 0; d < rank; ++d) {
            const u32 dim = detail::take<u32>(buf, pos);
            shape.push_back(i64(dim));
            size *= i64(dim);
        }
        const size_t bytes = size_t(size) * sizeof(T);
        check_runtime(pos + bytes + sizeof(u32) <= buf.size(),
                      "checkpoint: truncated payload for tensor " + name);
        Tensor<T> tensor(shape);
        std::memcpy(tensor.data(), buf.data() + pos, bytes);
        pos += bytes;
        check_runtime(data.tensors.emplace(name, std::move(tensor)).second,
                      "checkpoint: duplicate tensor " + name);
    }
    check_runtime(pos + sizeof(u32) == buf.size(), "checkpoint: trailing bytes after tensors");
    return data;
}

}  // namespace vdiff
