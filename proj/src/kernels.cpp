#include "shotinf/kernels.hpp"

#include <cmath>
#include <cstddef>

namespace shotinf::kernels {

void conv1d_same(std::span<const double> x, std::size_t n, std::size_t c_in, std::span<const double> w,
                 std::size_t k, std::size_t c_out, std::span<const double> bias, std::span<double> y) {
    const auto half = static_cast<std::ptrdiff_t>(k / 2);
    const auto rows = static_cast<std::ptrdiff_t>(n);
    const auto cols = static_cast<std::ptrdiff_t>(c_out);
    #pragma omp parallel for collapse(2) schedule(static) if (n * c_out * k * c_in >= kParallelMinWork)
    for (std::ptrdiff_t t = 0; t < rows; ++t) {
        for (std::ptrdiff_t o = 0; o < cols; ++o) {
            double acc = bias[static_cast<std::size_t>(o)];
            for (std::size_t kk = 0; kk < k; ++kk) {
                const std::ptrdiff_t src = t + static_cast<std::ptrdiff_t>(kk) - half;
                if (src < 0 || src >= rows) continue;
                const double* xr = x.data() + static_cast<std::size_t>(src) * c_in;
                const double* wk = w.data() + kk * c_in * c_out + static_cast<std::size_t>(o);
                for (std::size_t c = 0; c < c_in; ++c) acc += xr[c] * wk[c * c_out];
            }
            y[static_cast<std::size_t>(t) * c_out + static_cast<std::size_t>(o)] = acc;
        }
    }
}

void conv1d_same_grad_input(std::span<const double> gy, std::size_t n, std::size_t c_in,
                            std::span<const double> w, std::size_t k, std::size_t c_out, std::span<double> gx) {
    const auto half = static_cast<std::ptrdiff_t>(k / 2);
    const auto rows = static_cast<std::ptrdiff_t>(n);
    const auto cols = static_cast<std::ptrdiff_t>(c_in);
    #pragma omp parallel for collapse(2) schedule(static) if (n * c_out * k * c_in >= kParallelMinWork)
    for (std::ptrdiff_t s = 0; s < rows; ++s) {
        for (std::ptrdiff_t c = 0; c < cols; ++c) {
            double acc = gx[static_cast<std::size_t>(s) * c_in + static_cast<std::size_t>(c)];
            for (std::size_t kk = 0; kk < k; ++kk) {
                const std::ptrdiff_t t = s - static_cast<std::ptrdiff_t>(kk) + half;
                if (t < 0 || t >= rows) continue;
                const double* g = gy.data() + static_cast<std::size_t>(t) * c_out;
                const double* wk = w.data() + (kk * c_in + static_cast<std::size_t>(c)) * c_out;
                for (std::size_t o = 0; o < c_out; ++o) acc += g[o] * wk[o];
            }
            gx[static_cast<std::size_t>(s) * c_in + static_cast<std::size_t>(c)] = acc;
        }
    }
}

void conv1d_same_grad_kernel(std::span<const double> x, std::span<const double> gy, std::size_t n,
                             std::size_t c_in, std::size_t k, std::size_t c_out, std::span<double> gw) {
    const auto half = static_cast<std::ptrdiff_t>(k / 2);
    const auto rows = static_cast<std::ptrdiff_t>(n);
    const auto taps = static_cast<std::ptrdiff_t>(k);
    const auto cins = static_cast<std::ptrdiff_t>(c_in);
    #pragma omp parallel for collapse(2) schedule(static) if (n * c_out * k * c_in >= kParallelMinWork)
    for (std::ptrdiff_t kk = 0; kk < taps; ++kk) {
        for (std::ptrdiff_t c = 0; c < cins; ++c) {
            double* gwr = gw.data() + (static_cast<std::size_t>(kk) * c_in + static_cast<std::size_t>(c)) * c_out;
            for (std::size_t o = 0; o < c_out; ++o) {
                double acc = gwr[o];
                for (std::ptrdiff_t t = 0; t < rows; ++t) {
                    const std::ptrdiff_t src = t + kk - half;
                    if (src < 0 || src >= rows) continue;
                    acc += x[static_cast<std::size_t>(src) * c_in + static_cast<std::size_t>(c)] *
                           gy[static_cast<std::size_t>(t) * c_out + o];
                }
                gwr[o] = acc;
            }
        }
    }
}

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
            std::size_t k, std::size_t n, bool accumulate) {
    const auto rows = static_cast<std::ptrdiff_t>(m);
    const auto cols = static_cast<std::ptrdiff_t>(n);
    #pragma omp parallel for collapse(2) schedule(static) if (m * k * n >= kParallelMinWork)
    for (std::ptrdiff_t i = 0; i < rows; ++i) {
        for (std::ptrdiff_t j = 0; j < cols; ++j) {
            const std::size_t out = static_cast<std::size_t>(i) * n + static_cast<std::size_t>(j);
            double acc = accumulate ? c[out] : 0.0;
            const double* ar = a.data() + static_cast<std::size_t>(i) * k;
            for (std::size_t p = 0; p < k; ++p) acc += ar[p] * b[p * n + static_cast<std::size_t>(j)];
            c[out] = acc;
        }
    }
}

void matmul_at_b(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
                 std::size_t k, std::size_t n) {
    const auto rows = static_cast<std::ptrdiff_t>(k);
    const auto cols = static_cast<std::ptrdiff_t>(n);
    #pragma omp parallel for collapse(2) schedule(static) if (m * k * n >= kParallelMinWork)
    for (std::ptrdiff_t p = 0; p < rows; ++p) {
        for (std::ptrdiff_t j = 0; j < cols; ++j) {
            const std::size_t out = static_cast<std::size_t>(p) * n + static_cast<std::size_t>(j);
            double acc = c[out];
            for (std::size_t i = 0; i < m; ++i)
                acc += a[i * k + static_cast<std::size_t>(p)] * b[i * n + static_cast<std::size_t>(j)];
            c[out] = acc;
        }
    }
}

void matmul_a_bt(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
                 std::size_t n, std::size_t k) {
    const auto rows = static_cast<std::ptrdiff_t>(m);
    const auto cols = static_cast<std::ptrdiff_t>(k);
    #pragma omp parallel for collapse(2) schedule(static) if (m * k * n >= kParallelMinWork)
    for (std::ptrdiff_t i = 0; i < rows; ++i) {
        for (std::ptrdiff_t p = 0; p < cols; ++p) {
            const std::size_t out = static_cast<std::size_t>(i) * k + static_cast<std::size_t>(p);
            double acc = c[out];
            const double* ar = a.data() + static_cast<std::size_t>(i) * n;
            const double* br = b.data() + static_cast<std::size_t>(p) * n;
            for (std::size_t j = 0; j < n; ++j) acc += ar[j] * br[j];
            c[out] = acc;
        }
    }
}

void adam_update(std::span<double> value, std::span<const double> grad, std::span<double> m, std::span<double> v,
                 const AdamHyper& h, long long step) {
    const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(step));
    const auto count = static_cast<std::ptrdiff_t>(value.size());
    #pragma omp parallel for schedule(static) if (value.size() >= kParallelMinWork)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
        const auto u = static_cast<std::size_t>(i);
        const double g = grad[u];
        m[u] = h.beta1 * m[u] + (1.0 - h.beta1) * g;
        v[u] = h.beta2 * v[u] + (1.0 - h.beta2) * g * g;
        const double m_hat = m[u] / c1;
        const double v_hat = v[u] / c2;
        value[u] -= h.lr * m_hat / (std::sqrt(v_hat) + h.eps);
    }
}

} // namespace shotinf::kernels
