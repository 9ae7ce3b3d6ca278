#include "tensor.hpp"

#include <cstdio>
#include <cstring>
#include <memory>

#include "error.hpp"
#include "serial.hpp"

namespace slimdet {

void write_tensor(const Tensor& t, const std::string& path) {
    std::vector<uint8_t> buf;
    buf.push_back('F');
    buf.push_back('T');
    buf.push_back('S');
    buf.push_back('R');
    put_u32le(buf, static_cast<uint32_t>(t.dims.size()));
    for (uint32_t d : t.dims) put_u32le(buf, d);
    for (float v : t.data) put_f32le(buf, v);
    write_file_bytes(path, buf.data(), buf.size());
}

Tensor read_tensor(const std::string& path) {
    std::vector<uint8_t> buf = read_file_bytes(path);
    if (buf.size() < 8) fail(ErrorKind::io, "not a tensor file: " + path);
    if (std::memcmp(buf.data(), "FTSR", 4) != 0)
        fail(ErrorKind::io, "bad tensor magic in " + path);
    size_t off = 4;
    uint32_t rank = get_u32le(buf, off);
    if (rank == 0 || rank > 8) fail(ErrorKind::io, "bad tensor rank in " + path);
    Tensor t;
    size_t total = 1;
    for (uint32_t i = 0; i < rank; ++i) {
        uint32_t d = get_u32le(buf, off);
        t.dims.push_back(d);
        total *= d;
    }
    if (buf.size() - off != total * 4)
        fail(ErrorKind::io, "tensor payload size mismatch in " + path);
    t.data.resize(total);
    for (size_t i = 0; i < total; ++i) t.data[i] = get_f32le(buf, off);
    return t;
}

}  // namespace slimdet
