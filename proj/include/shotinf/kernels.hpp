#pragma once

// Dense numeric kernels behind the autodiff primitives. The default
// implementations are OpenMP-parallel over output elements; each output
// element is accumulated in the same order as the reference in
// `kernels::serial`, so both produce bit-identical results.
//
// All matrices are row-major. Conv kernels are laid out [K][C_in][C_out].

#include <cstddef>
#include <span>

namespace shotinf::kernels {

/// Work (multiply-adds) below which the parallel kernels stay on one thread.
inline constexpr std::size_t kParallelMinWork = std::size_t{1} << 15;

struct AdamHyper {
    double lr = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// y[n][o] = bias[o] + sum_{k,c} x[n + k - (K-1)/2][c] * w[k][c][o], zero padded.
void conv1d_same(std::span<const double> x, std::size_t n, std::size_t c_in, std::span<const double> w,
                 std::size_t k, std::size_t c_out, std::span<const double> bias, std::span<double> y);
/// gx += d(sum gy*y)/dx
void conv1d_same_grad_input(std::span<const double> gy, std::size_t n, std::size_t c_in,
                            std::span<const double> w, std::size_t k, std::size_t c_out, std::span<double> gx);
/// gw += d(sum gy*y)/dw
void conv1d_same_grad_kernel(std::span<const double> x, std::span<const double> gy, std::size_t n,
                             std::size_t c_in, std::size_t k, std::size_t c_out, std::span<double> gw);

/// c[m x n] (+)= a[m x k] * b[k x n]
void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
            std::size_t k, std::size_t n, bool accumulate);
/// c[k x n] += a[m x k]^T * b[m x n]
void matmul_at_b(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
                 std::size_t k, std::size_t n);
/// c[m x k] += a[m x n] * b[k x n]^T
void matmul_a_bt(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
                 std::size_t n, std::size_t k);

/// Bias-corrected Adam update; `step` is the 1-based step number after increment.
void adam_update(std::span<double> value, std::span<const double> grad, std::span<double> m, std::span<double> v,
                 const AdamHyper& h, long long step);

namespace serial {

void conv1d_same(std::span<const double> x, std::size_t n, std::size_t c_in, std::span<const double> w,
                 std::size_t k, std::size_t c_out, std::span<const double> bias, std::span<double> y);
void conv1d_same_grad_input(std::span<const double> gy, std::size_t n, std::size_t c_in,
                            std::span<const double> w, std::size_t k, std::size_t c_out, std::span<double> gx);
void conv1d_same_grad_kernel(std::span<const double> x, std::span<const double> gy, std::size_t n,
                             std::size_t c_in, std::size_t k, std::size_t c_out, std::span<double> gw);
void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
            std::size_t k, std::size_t n, bool accumulate);
void matmul_at_b(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
                 std::size_t k, std::size_t n);
void matmul_a_bt(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
                 std::size_t n, std::size_t k);
void adam_update(std::span<double> value, std::span<const double> grad, std::span<double> m, std::span<double> v,
                 const AdamHyper& h, long long step);

} // namespace serial

} // namespace shotinf::kernels
