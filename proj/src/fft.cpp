#include "gridhf/fft.hpp"

#include <cmath>
#include <mutex>
#include <unordered_map>

namespace gridhf {

namespace {

bool is_pow2(size_t n) { return n && !(n & (n - 1)); }

void fft_pow2(cplx* a, size_t n, bool inverse) {
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (size_t len = 2; len <= n; len <<= 1) {
        double ang = 2.0 * M_PI / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
        cplx wl(std::cos(ang), std::sin(ang));
        for (size_t i = 0; i < n; i += len) {
            cplx w(1.0, 0.0);
            for (size_t j = 0; j < len / 2; ++j) {
                cplx u = a[i + j], v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

struct BluesteinPlan {
    size_t n = 0, m = 0;
    std::vector<cplx> chirp;      // exp(-i pi k^2 / n)
    std::vector<cplx> kernel_ft;  // FFT of the chirp convolution kernel
};

const BluesteinPlan& bluestein_plan(size_t n) {
    static std::mutex mu;
    static std::unordered_map<size_t, BluesteinPlan> plans;
    std::lock_guard<std::mutex> lk(mu);
    auto it = plans.find(n);
    if (it != plans.end()) return it->second;
    BluesteinPlan p;
    p.n = n;
    size_t m = 1;
    while (m < 2 * n - 1) m <<= 1;
    p.m = m;
    p.chirp.resize(n);
    for (size_t k = 0; k < n; ++k) {
        // k^2 mod 2n keeps the angle argument small
        size_t k2 = (k * k) % (2 * n);
        double ang = M_PI * static_cast<double>(k2) / static_cast<double>(n);
        p.chirp[k] = cplx(std::cos(ang), -std::sin(ang));
    }
    std::vector<cplx> b(m, cplx(0, 0));
    b[0] = std::conj(p.chirp[0]);
    for (size_t k = 1; k < n; ++k) b[k] = b[m - k] = std::conj(p.chirp[k]);
    fft_pow2(b.data(), m, false);
    p.kernel_ft = std::move(b);
    return plans.emplace(n, std::move(p)).first->second;
}

void fft_bluestein_forward(cplx* a, size_t n) {
    const BluesteinPlan& p = bluestein_plan(n);
    std::vector<cplx> x(p.m, cplx(0, 0));
    for (size_t k = 0; k < n; ++k) x[k] = a[k] * p.chirp[k];
    fft_pow2(x.data(), p.m, false);
    for (size_t k = 0; k < p.m; ++k) x[k] *= p.kernel_ft[k];
    fft_pow2(x.data(), p.m, true);
    double inv_m = 1.0 / static_cast<double>(p.m);
    for (size_t k = 0; k < n; ++k) a[k] = x[k] * p.chirp[k] * inv_m;
}

void fft_any(cplx* a, size_t n, bool inverse) {
    if (n <= 1) return;
    if (is_pow2(n)) {
        fft_pow2(a, n, inverse);
    } else if (!inverse) {
        fft_bluestein_forward(a, n);
    } else {
        // inverse via conjugation of the forward transform
        for (size_t i = 0; i < n; ++i) a[i] = std::conj(a[i]);
        fft_bluestein_forward(a, n);
        for (size_t i = 0; i < n; ++i) a[i] = std::conj(a[i]);
    }
    if (inverse) {
        double s = 1.0 / static_cast<double>(n);
        for (size_t i = 0; i < n; ++i) a[i] *= s;
    }
}

} // namespace

void fft(std::vector<cplx>& a, bool inverse) { fft_any(a.data(), a.size(), inverse); }

void fft3(const std::array<int, 3>& dims, std::vector<cplx>& data, bool inverse) {
    size_t n0 = dims[0], n1 = dims[1], n2 = dims[2];
    // axis 2: contiguous rows
    for (size_t i = 0; i < n0 * n1; ++i) fft_any(data.data() + i * n2, n2, inverse);
    // axis 1
    std::vector<cplx> buf(std::max(n0, n1));
    for (size_t i = 0; i < n0; ++i)
        for (size_t k = 0; k < n2; ++k) {
            for (size_t j = 0; j < n1; ++j) buf[j] = data[(i * n1 + j) * n2 + k];
            fft_any(buf.data(), n1, inverse);
            for (size_t j = 0; j < n1; ++j) data[(i * n1 + j) * n2 + k] = buf[j];
        }
    // axis 0
    for (size_t j = 0; j < n1; ++j)
        for (size_t k = 0; k < n2; ++k) {
            for (size_t i = 0; i < n0; ++i) buf[i] = data[(i * n1 + j) * n2 + k];
            fft_any(buf.data(), n0, inverse);
            for (size_t i = 0; i < n0; ++i) data[(i * n1 + j) * n2 + k] = buf[i];
        }
}

} // namespace gridhf
