// SPDX-License-Identifier: Apache-2.0
//
// Serial reference kernels: straight loop transcriptions of the operation
// definitions, no parallelism, no layout tricks. They are the oracles the
// test suites compare the OpenMP kernels against, and the baseline in the
// kernel benchmark. Keep them boring.
#pragma once

#include <cstdint>
#include <vector>

namespace horgait::ref {

// y[t,o,oy,ox] = b[o] + sum_{c,ky,kx} w[o,c,ky,kx] * x[t,c,oy*s+ky-p,ox*s+kx-p]
template <typename S>
std::vector<S> conv2d_naive(const std::vector<S>& x, int T, int C, int H, int W,
                            const std::vector<S>& w, int cout, int kh, int kw,
                            const std::vector<S>& b, int stride, int pad) {
    int oh = (H + 2 * pad - kh) / stride + 1;
    int ow = (W + 2 * pad - kw) / stride + 1;
    std::vector<S> y(static_cast<size_t>(T) * cout * oh * ow, S(0));
    for (int t = 0; t < T; ++t)
        for (int o = 0; o < cout; ++o)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    S acc = b[o];
                    for (int c = 0; c < C; ++c)
                        for (int ky = 0; ky < kh; ++ky)
                            for (int kx = 0; kx < kw; ++kx) {
                                int iy = oy * stride + ky - pad;
                                int ix = ox * stride + kx - pad;
                                if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                                acc += w[((static_cast<int64_t>(o) * C + c) * kh + ky) * kw + kx] *
                                       x[((static_cast<int64_t>(t) * C + c) * H + iy) * W + ix];
                            }
                    y[((static_cast<int64_t>(t) * cout + o) * oh + oy) * ow + ox] = acc;
                }
    return y;
}

// per-channel, stride 1, same pad; w[c,ky,kx]
template <typename S>
std::vector<S> depthwise_naive(const std::vector<S>& x, int T, int C, int H, int W,
                               const std::vector<S>& w, int kh, int kw) {
    int ph = kh / 2, pw = kw / 2;
    std::vector<S> y(x.size(), S(0));
    for (int t = 0; t < T; ++t)
        for (int c = 0; c < C; ++c)
            for (int oy = 0; oy < H; ++oy)
                for (int ox = 0; ox < W; ++ox) {
                    S acc = 0;
                    for (int ky = 0; ky < kh; ++ky)
                        for (int kx = 0; kx < kw; ++kx) {
                            int iy = oy + ky - ph;
                            int ix = ox + kx - pw;
                            if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                            acc += w[(static_cast<int64_t>(c) * kh + ky) * kw + kx] *
                                   x[((static_cast<int64_t>(t) * C + c) * H + iy) * W + ix];
                        }
                    y[((static_cast<int64_t>(t) * C + c) * H + oy) * W + ox] = acc;
                }
    return y;
}

// temporal conv, same pad over T; w[o,c,k]
template <typename S>
std::vector<S> conv1d_temporal_naive(const std::vector<S>& x, int T, int C, int H, int W,
                                     const std::vector<S>& w, int cout, int kt,
                                     const std::vector<S>& b) {
    int pt = kt / 2;
    int64_t hw = static_cast<int64_t>(H) * W;
    std::vector<S> y(static_cast<size_t>(T) * cout * hw, S(0));
    for (int t = 0; t < T; ++t)
        for (int o = 0; o < cout; ++o)
            for (int64_t i = 0; i < hw; ++i) {
                S acc = b[o];
                for (int c = 0; c < C; ++c)
                    for (int k = 0; k < kt; ++k) {
                        int it = t + k - pt;
                        if (it < 0 || it >= T) continue;
                        acc += w[(static_cast<int64_t>(o) * C + c) * kt + k] *
                               x[(static_cast<int64_t>(it) * C + c) * hw + i];
                    }
                y[(static_cast<int64_t>(t) * cout + o) * hw + i] = acc;
            }
    return y;
}

// trailing-axis linear on [rows, cin]
template <typename S>
std::vector<S> linear_naive(const std::vector<S>& x, int64_t rows, int cin,
                            const std::vector<S>& w, int cout, const std::vector<S>& b) {
    std::vector<S> y(static_cast<size_t>(rows) * cout);
    for (int64_t m = 0; m < rows; ++m)
        for (int o = 0; o < cout; ++o) {
            S acc = b[o];
            for (int i = 0; i < cin; ++i)
                acc += w[static_cast<int64_t>(o) * cin + i] * x[m * cin + i];
            y[m * cout + o] = acc;
        }
    return y;
}

// channel mix on [T,C,H,W]
template <typename S>
std::vector<S> pointwise_linear_naive(const std::vector<S>& x, int T, int C, int H, int W,
                                      const std::vector<S>& w, int cout, const std::vector<S>& b) {
    int64_t hw = static_cast<int64_t>(H) * W;
    std::vector<S> y(static_cast<size_t>(T) * cout * hw);
    for (int t = 0; t < T; ++t)
        for (int o = 0; o < cout; ++o)
            for (int64_t i = 0; i < hw; ++i) {
                S acc = b[o];
                for (int c = 0; c < C; ++c)
                    acc += w[static_cast<int64_t>(o) * C + c] *
                           x[(static_cast<int64_t>(t) * C + c) * hw + i];
                y[(static_cast<int64_t>(t) * cout + o) * hw + i] = acc;
            }
    return y;
}

}  // namespace horgait::ref
