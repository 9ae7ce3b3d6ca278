#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <memory>
#include <string>
#include <vector>

#include "error.hpp"

namespace slimdet {

struct FileCloser {
    void operator()(FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

inline std::vector<uint8_t> read_file_bytes(const std::string& path) {
    FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) fail(ErrorKind::io, "cannot open: " + path);
    std::vector<uint8_t> bytes;
    uint8_t buf[65536];
    size_t got;
    while ((got = std::fread(buf, 1, sizeof buf, f.get())) > 0) bytes.insert(bytes.end(), buf, buf + got);
    if (std::ferror(f.get())) fail(ErrorKind::io, "read error: " + path);
    return bytes;
}

inline std::string read_file_text(const std::string& path) {
    std::vector<uint8_t> bytes = read_file_bytes(path);
    return std::string(bytes.begin(), bytes.end());
}

inline void write_file_bytes(const std::string& path, const uint8_t* data, size_t n) {
    FilePtr f(std::fopen(path.c_str(), "wb"));
    if (!f) fail(ErrorKind::io, "cannot open for writing: " + path);
    if (std::fwrite(data, 1, n, f.get()) != n) fail(ErrorKind::io, "short write: " + path);
}

inline void write_file_text(const std::string& path, const std::string& text) {
    write_file_bytes(path, reinterpret_cast<const uint8_t*>(text.data()), text.size());
}

// Little-endian primitives for the binary file formats. Fixed byte order
// regardless of host so golden files match across machines.

inline void put_u32le(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(static_cast<uint8_t>(v));
    out.push_back(static_cast<uint8_t>(v >> 8));
    out.push_back(static_cast<uint8_t>(v >> 16));
    out.push_back(static_cast<uint8_t>(v >> 24));
}

inline void put_u64le(std::vector<uint8_t>& out, uint64_t v) {
    put_u32le(out, static_cast<uint32_t>(v));
    put_u32le(out, static_cast<uint32_t>(v >> 32));
}

inline void put_f32le(std::vector<uint8_t>& out, float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32le(out, bits);
}

inline uint32_t get_u32le(const std::vector<uint8_t>& in, size_t& off) {
    if (off + 4 > in.size()) fail(ErrorKind::io, "unexpected end of binary data");
    uint32_t v = static_cast<uint32_t>(in[off]) | static_cast<uint32_t>(in[off + 1]) << 8 |
                 static_cast<uint32_t>(in[off + 2]) << 16 |
                 static_cast<uint32_t>(in[off + 3]) << 24;
    off += 4;
    return v;
}

inline uint64_t get_u64le(const std::vector<uint8_t>& in, size_t& off) {
    uint64_t lo = get_u32le(in, off);
    uint64_t hi = get_u32le(in, off);
    return lo | (hi << 32);
}

inline float get_f32le(const std::vector<uint8_t>& in, size_t& off) {
    uint32_t bits = get_u32le(in, off);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

}  // namespace slimdet
