// SPDX-License-Identifier: Apache-2.0
//
// Timing harness comparing the OpenMP-parallel convolution kernels against
// the serial reference implementations, with a max-abs-diff agreement check.
#include <chrono>
#include <cstdio>
#include <functional>
#include <vector>

#include "horgait/ref_kernels.hpp"
#include "horgait/rng.hpp"
#include "horgait/tensor.hpp"

using namespace horgait;

namespace {

std::vector<double> random_values(size_t n, SplitMix64& rng) {
    std::vector<double> v(n);
    for (auto& x : v) x = 2.0 * rng.uniform() - 1.0;
    return v;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

double time_ms(const std::function<void()>& f, int reps) {
    f();  // warm-up
    auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < reps; ++i) f();
    auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

}  // namespace

int main() {
    SplitMix64 rng(7);
    const int reps = 5;
    bool all_ok = true;
    std::printf("%-22s %10s %10s %8s %12s\n", "kernel", "omp (ms)", "serial(ms)", "speedup",
                "max|diff|");

    {
        const int T = 8, Cin = 32, Cout = 64, H = 32, W = 22, K = 3;
        Tensor x = Tensor::leaf({T, Cin, H, W}, random_values(size_t(T) * Cin * H * W, rng));
        Tensor w = Tensor::leaf({Cout, Cin, K, K}, random_values(size_t(Cout) * Cin * K * K, rng));
        Tensor b = Tensor::leaf({Cout}, random_values(Cout, rng));
        std::vector<double> ref_out;
        Tensor omp_out;
        double t_omp = time_ms([&] { omp_out = conv2d(x, w, b, 1, 1); }, reps);
        double t_ref = time_ms(
            [&] { ref_out = ref::conv2d_naive(x.data(), T, Cin, H, W, w.data(), Cout, K, K, b.data(), 1, 1); },
            reps);
        double diff = max_abs_diff(omp_out.data(), ref_out);
        all_ok = all_ok && diff < 1e-10;
        std::printf("%-22s %10.2f %10.2f %7.2fx %12.3e\n", "conv2d 3x3", t_omp, t_ref, t_ref / t_omp,
                    diff);
    }
    {
        const int T = 8, C = 64, H = 32, W = 22, K = 7;
        Tensor x = Tensor::leaf({T, C, H, W}, random_values(size_t(T) * C * H * W, rng));
        Tensor w = Tensor::leaf({C, K, K}, random_values(size_t(C) * K * K, rng));
        std::vector<double> ref_out;
        Tensor omp_out;
        double t_omp = time_ms([&] { omp_out = depthwise_conv2d(x, w); }, reps);
        double t_ref =
            time_ms([&] { ref_out = ref::depthwise_naive(x.data(), T, C, H, W, w.data(), K, K); }, reps);
        double diff = max_abs_diff(omp_out.data(), ref_out);
        all_ok = all_ok && diff < 1e-10;
        std::printf("%-22s %10.2f %10.2f %7.2fx %12.3e\n", "depthwise 7x7", t_omp, t_ref,
                    t_ref / t_omp, diff);
    }
    {
        const int T = 16, Cin = 32, Cout = 32, H = 16, W = 11, K = 3;
        Tensor x = Tensor::leaf({T, Cin, H, W}, random_values(size_t(T) * Cin * H * W, rng));
        Tensor w = Tensor::leaf({Cout, Cin, K}, random_values(size_t(Cout) * Cin * K, rng));
        Tensor b = Tensor::leaf({Cout}, random_values(Cout, rng));
        std::vector<double> ref_out;
        Tensor omp_out;
        double t_omp = time_ms([&] { omp_out = conv1d_temporal(x, w, b); }, reps);
        double t_ref = time_ms(
            [&] { ref_out = ref::conv1d_temporal_naive(x.data(), T, Cin, H, W, w.data(), Cout, K, b.data()); },
            reps);
        double diff = max_abs_diff(omp_out.data(), ref_out);
        all_ok = all_ok && diff < 1e-10;
        std::printf("%-22s %10.2f %10.2f %7.2fx %12.3e\n", "conv1d temporal", t_omp, t_ref,
                    t_ref / t_omp, diff);
    }
    {
        const int T = 8, Cin = 64, Cout = 128, H = 32, W = 22;
        Tensor x = Tensor::leaf({T, Cin, H, W}, random_values(size_t(T) * Cin * H * W, rng));
        Tensor w = Tensor::leaf({Cout, Cin}, random_values(size_t(Cout) * Cin, rng));
        Tensor b = Tensor::leaf({Cout}, random_values(Cout, rng));
        std::vector<double> ref_out;
        Tensor omp_out;
        double t_omp = time_ms([&] { omp_out = pointwise_linear(x, w, b); }, reps);
        double t_ref = time_ms(
            [&] { ref_out = ref::pointwise_linear_naive(x.data(), T, Cin, H, W, w.data(), Cout, b.data()); },
            reps);
        double diff = max_abs_diff(omp_out.data(), ref_out);
        all_ok = all_ok && diff < 1e-10;
        std::printf("%-22s %10.2f %10.2f %7.2fx %12.3e\n", "pointwise linear", t_omp, t_ref,
                    t_ref / t_omp, diff);
    }

    std::printf("agreement: %s\n", all_ok ? "ok" : "FAIL");
    return all_ok ? 0 : 1;
}
