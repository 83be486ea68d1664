// SPDX-License-Identifier: Apache-2.0
//
// TNSR binary container:
//   magic "TNSR", u8 version=1, u8 dtype (1=f32, 2=f64), u8 ndim, 1 pad byte,
//   ndim x u32 little-endian dims, row-major little-endian payload.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace horgait {

enum class TnsrDtype : uint8_t { f32 = 1, f64 = 2 };

struct TnsrData {
    TnsrDtype dtype = TnsrDtype::f64;
    std::vector<int> shape;
    std::vector<double> values;  // widened for f32 files
};

TnsrData read_tnsr(const std::string& path);
void write_tnsr(const std::string& path, const std::vector<int>& shape,
                const std::vector<double>& values, TnsrDtype dtype);
void write_tnsr(const std::string& path, const std::vector<int>& shape,
                const std::vector<float>& values);

}  // namespace horgait
