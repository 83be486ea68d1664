// SPDX-License-Identifier: Apache-2.0
#include "horgait/tnsr_io.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace horgait {

namespace {

// Serialization assumes a little-endian host, as does everything this
// project targets.
template <typename T>
void put(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in, const std::string& path) {
    T v;
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw std::runtime_error("truncated TNSR file: " + path);
    return v;
}

void write_header(std::ofstream& out, const std::vector<int>& shape, TnsrDtype dtype) {
    out.write("TNSR", 4);
    put<uint8_t>(out, 1);
    put<uint8_t>(out, static_cast<uint8_t>(dtype));
    put<uint8_t>(out, static_cast<uint8_t>(shape.size()));
    put<uint8_t>(out, 0);
    for (int d : shape) put<uint32_t>(out, static_cast<uint32_t>(d));
}

}  // namespace

TnsrData read_tnsr(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "TNSR", 4) != 0)
        throw std::runtime_error("not a TNSR file: " + path);
    uint8_t version = get<uint8_t>(in, path);
    if (version != 1) throw std::runtime_error("unsupported TNSR version in " + path);
    uint8_t dtype = get<uint8_t>(in, path);
    uint8_t ndim = get<uint8_t>(in, path);
    get<uint8_t>(in, path);  // pad

    TnsrData out;
    int64_t n = 1;
    for (int i = 0; i < ndim; ++i) {
        uint32_t d = get<uint32_t>(in, path);
        out.shape.push_back(static_cast<int>(d));
        n *= d;
    }
    out.values.resize(static_cast<size_t>(n));
    if (dtype == static_cast<uint8_t>(TnsrDtype::f32)) {
        out.dtype = TnsrDtype::f32;
        std::vector<float> buf(static_cast<size_t>(n));
        in.read(reinterpret_cast<char*>(buf.data()), n * 4);
        if (!in) throw std::runtime_error("truncated TNSR payload: " + path);
        for (int64_t i = 0; i < n; ++i) out.values[static_cast<size_t>(i)] = buf[static_cast<size_t>(i)];
    } else if (dtype == static_cast<uint8_t>(TnsrDtype::f64)) {
        out.dtype = TnsrDtype::f64;
        in.read(reinterpret_cast<char*>(out.values.data()), n * 8);
        if (!in) throw std::runtime_error("truncated TNSR payload: " + path);
    } else {
        throw std::runtime_error("unknown TNSR dtype in " + path);
    }
    return out;
}

void write_tnsr(const std::string& path, const std::vector<int>& shape,
                const std::vector<double>& values, TnsrDtype dtype) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    write_header(out, shape, dtype);
    if (dtype == TnsrDtype::f64) {
        out.write(reinterpret_cast<const char*>(values.data()),
                  static_cast<std::streamsize>(values.size() * 8));
    } else {
        std::vector<float> buf(values.begin(), values.end());
        out.write(reinterpret_cast<const char*>(buf.data()),
                  static_cast<std::streamsize>(buf.size() * 4));
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

void write_tnsr(const std::string& path, const std::vector<int>& shape,
                const std::vector<float>& values) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    write_header(out, shape, TnsrDtype::f32);
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * 4));
    if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace horgait
