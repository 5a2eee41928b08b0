#include "gridhf/structured.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "gridhf/errors.hpp"

namespace gridhf {

namespace {

void check_size(long expect, size_t got, const char* who) {
    if (static_cast<long>(got) != expect) {
        std::ostringstream os;
        os << who << ": vector length " << got << " does not match grid size " << expect;
        throw DimensionError(os.str());
    }
}

} // namespace

const std::vector<cplx>& ThreeLevelCirculant::spectrum() const {
    if (spectrum_.empty() && !generator.empty()) {
        spectrum_.assign(generator.begin(), generator.end());
        fft3(dims, spectrum_, false);
    }
    return spectrum_;
}

std::vector<double> ThreeLevelCirculant::matvec(const std::vector<double>& v) const {
    check_size(size(), v.size(), "circulant_matvec");
    std::vector<cplx> x(v.begin(), v.end());
    fft3(dims, x, false);
    const std::vector<cplx>& lam = spectrum();
    for (long i = 0; i < size(); ++i) x[i] *= lam[i];
    fft3(dims, x, true);
    std::vector<double> y(size());
    for (long i = 0; i < size(); ++i) y[i] = x[i].real();
    return y;
}

ThreeLevelCirculant ThreeLevelCirculant::from_stencil(const StencilTable& s,
                                                      const std::array<int, 3>& dims) {
    ThreeLevelCirculant c;
    c.dims = dims;
    c.generator.assign(static_cast<size_t>(dims[0]) * dims[1] * dims[2], 0.0);
    GridSpec g;
    for (int ax = 0; ax < 3; ++ax) g.n[ax] = dims[ax];
    // band convention y_a = sum_d s(d) x[a+d] means column b-a = d, i.e. the
    // generator (first column, b = 0) holds s at the negated offset
    for (const auto& [off, v] : s.entries)
        c.generator[g.wrap(-off.d[0], -off.d[1], -off.d[2])] += v;
    return c;
}

ThreeLevelCirculant ThreeLevelCirculant::delta(const std::array<int, 3>& dims) {
    ThreeLevelCirculant c;
    c.dims = dims;
    c.generator.assign(static_cast<size_t>(dims[0]) * dims[1] * dims[2], 0.0);
    c.generator[0] = 1.0;
    return c;
}

ThreeLevelCirculant ThreeLevelCirculant::apply_function(const std::function<double(double)>& phi,
                                                        double shift) const {
    const std::vector<cplx>& lam = spectrum();
    std::vector<cplx> mapped(lam.size());
    for (size_t i = 0; i < lam.size(); ++i) {
        if (std::abs(lam[i].imag()) > 1e-9 * (1.0 + std::abs(lam[i].real()))) {
            std::ostringstream os;
            os << "spectrum value " << lam[i].real() << "+" << lam[i].imag()
               << "i is not real; function application needs a symmetric generator";
            throw SingularSpectrumError(os.str());
        }
        double v = phi(lam[i].real() + shift);
        if (!std::isfinite(v)) {
            std::ostringstream os;
            os << "function undefined at eigenvalue " << lam[i].real() + shift
               << " (index " << i << ")";
            throw SingularSpectrumError(os.str());
        }
        mapped[i] = cplx(v, 0.0);
    }
    ThreeLevelCirculant out;
    out.dims = dims;
    fft3(dims, mapped, true);
    out.generator.resize(mapped.size());
    for (size_t i = 0; i < mapped.size(); ++i) out.generator[i] = mapped[i].real();
    return out;
}

std::vector<double> BandOperator::matvec(const std::vector<double>& v) const {
    check_size(size(), v.size(), "band matvec");
    if (mode == BandMode::via_circulant)
        return ThreeLevelCirculant::from_stencil(stencil, dims).matvec(v);
    GridSpec g;
    for (int ax = 0; ax < 3; ++ax) g.n[ax] = dims[ax];
    std::vector<double> y(size(), 0.0);
    for (const auto& [off, val] : stencil.entries) {
        for (int i = 0; i < dims[0]; ++i)
            for (int j = 0; j < dims[1]; ++j)
                for (int k = 0; k < dims[2]; ++k)
                    y[g.flatten(i, j, k)] +=
                        val * v[g.wrap(i + off.d[0], j + off.d[1], k + off.d[2])];
    }
    return y;
}

BandMode measure_band_crossover(const StencilTable& s, const std::array<int, 3>& dims) {
    BandOperator band{s, dims, BandMode::direct};
    std::vector<double> v(band.size());
    for (long i = 0; i < band.size(); ++i) v[i] = 1.0 / (1.0 + i);
    auto time_path = [&](BandMode m) {
        band.mode = m;
        auto t0 = std::chrono::steady_clock::now();
        for (int r = 0; r < 3; ++r) v = band.matvec(v);
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };
    double direct = time_path(BandMode::direct);
    double fftp = time_path(BandMode::via_circulant);
    return direct <= fftp ? BandMode::direct : BandMode::via_circulant;
}

std::vector<double> ShiftPermutation::apply(const std::vector<double>& v) const {
    GridSpec g;
    for (int ax = 0; ax < 3; ++ax) g.n[ax] = dims[ax];
    check_size(g.size(), v.size(), "shift permutation");
    std::vector<double> y(v.size());
    for (int i = 0; i < dims[0]; ++i)
        for (int j = 0; j < dims[1]; ++j)
            for (int k = 0; k < dims[2]; ++k)
                y[g.flatten(i, j, k)] = v[g.wrap(i - shift[0], j - shift[1], k - shift[2])];
    return y;
}

ShiftPermutation ShiftPermutation::inverse() const {
    return {{mod_offset(-shift[0], 0, dims[0]), mod_offset(-shift[1], 0, dims[1]),
             mod_offset(-shift[2], 0, dims[2])},
            dims};
}

std::vector<double> apply_B(const NucleusList& nuclei, const NuclearTable& W,
                            const GridSpec& grid, const std::vector<double>& v) {
    check_size(grid.size(), v.size(), "apply_B");
    nuclei.validate(grid);
    std::vector<double> y(grid.size(), 0.0);
    for (const Nucleus& nuc : nuclei.entries) {
        for (const auto& [off, vals] : W.w) {
            for (int i = 0; i < grid.n[0]; ++i)
                for (int j = 0; j < grid.n[1]; ++j)
                    for (int k = 0; k < grid.n[2]; ++k) {
                        long a = grid.flatten(i, j, k);
                        long rel = grid.wrap(i - nuc.cell[0], j - nuc.cell[1], k - nuc.cell[2]);
                        y[a] += nuc.charge * vals[rel] *
                                v[grid.wrap(i + off.d[0], j + off.d[1], k + off.d[2])];
                    }
        }
    }
    return y;
}

std::vector<Offset3> block_window(int p) {
    std::vector<Offset3> w;
    for (int di = -p; di <= p; ++di)
        for (int dj = -p; dj <= p; ++dj)
            for (int dk = -p; dk <= p; ++dk) w.push_back(Offset3{{di, dj, dk}});
    return w;
}

PairBlockVector apply_H(const std::vector<double>& c, const std::vector<double>& x,
                        const GridSpec& grid) {
    check_size(grid.size(), c.size(), "apply_H source");
    check_size(grid.size(), x.size(), "apply_H input");
    PairBlockVector g;
    g.dims = {grid.n[0], grid.n[1], grid.n[2]};
    g.p = grid.p;
    long N = grid.size();
    std::vector<Offset3> win = block_window(grid.p);
    g.data.assign(static_cast<size_t>(win.size()) * N, 0.0);
    for (size_t w = 0; w < win.size(); ++w)
        for (int i = 0; i < grid.n[0]; ++i)
            for (int j = 0; j < grid.n[1]; ++j)
                for (int k = 0; k < grid.n[2]; ++k) {
                    long a = grid.flatten(i, j, k);
                    g.at(static_cast<int>(w), a) =
                        c[grid.wrap(i + win[w].d[0], j + win[w].d[1], k + win[w].d[2])] * x[a];
                }
    return g;
}

std::vector<double> apply_H_adjoint(const std::vector<double>& c, const PairBlockVector& g,
                                    const GridSpec& grid) {
    check_size(grid.size(), c.size(), "apply_H_adjoint source");
    std::vector<Offset3> win = block_window(grid.p);
    check_size(static_cast<long>(win.size()) * grid.size(), g.data.size(), "apply_H_adjoint input");
    std::vector<double> y(grid.size(), 0.0);
    for (size_t w = 0; w < win.size(); ++w)
        for (int i = 0; i < grid.n[0]; ++i)
            for (int j = 0; j < grid.n[1]; ++j)
                for (int k = 0; k < grid.n[2]; ++k) {
                    long a = grid.flatten(i, j, k);
                    y[a] += c[grid.wrap(i + win[w].d[0], j + win[w].d[1], k + win[w].d[2])] *
                            g.at(static_cast<int>(w), a);
                }
    return y;
}

std::vector<double> apply_H_source_adjoint(const std::vector<double>& c,
                                           const PairBlockVector& g, const GridSpec& grid) {
    check_size(grid.size(), c.size(), "apply_H_source_adjoint source");
    std::vector<Offset3> win = block_window(grid.p);
    check_size(static_cast<long>(win.size()) * grid.size(), g.data.size(),
               "apply_H_source_adjoint input");
    std::vector<double> y(grid.size(), 0.0);
    for (size_t w = 0; w < win.size(); ++w)
        for (int i = 0; i < grid.n[0]; ++i)
            for (int j = 0; j < grid.n[1]; ++j)
                for (int k = 0; k < grid.n[2]; ++k) {
                    long b = grid.flatten(i, j, k);
                    long src = grid.wrap(i - win[w].d[0], j - win[w].d[1], k - win[w].d[2]);
                    y[b] += c[src] * g.at(static_cast<int>(w), src);
                }
    return y;
}

const std::vector<cplx>& FourCenterOperator::block_spectrum(const Offset3& d1,
                                                            const Offset3& d2) const {
    auto key = std::make_pair(d1, d2);
    auto it = spectra_.find(key);
    if (it != spectra_.end()) return it->second;
    auto src = table->t.find(key);
    std::vector<cplx> spec;
    if (src != table->t.end()) {
        spec.assign(src->second.begin(), src->second.end());
        fft3(dims, spec, false);
    }
    return spectra_.emplace(key, std::move(spec)).first->second;
}

PairBlockVector FourCenterOperator::apply_sym(const PairBlockVector& g) const {
    PairBlockVector a = apply(g, false);
    PairBlockVector b = apply(g, true);
    for (size_t i = 0; i < a.data.size(); ++i) a.data[i] = 0.5 * (a.data[i] + b.data[i]);
    return a;
}

PairBlockVector FourCenterOperator::apply(const PairBlockVector& g, bool transpose) const {
    long N = static_cast<long>(dims[0]) * dims[1] * dims[2];
    std::vector<Offset3> win = block_window(p);
    check_size(static_cast<long>(win.size()) * N, g.data.size(), "four-center apply");
    // forward-transform every input block once
    std::vector<std::vector<cplx>> ghat(win.size());
    for (size_t w = 0; w < win.size(); ++w) {
        ghat[w].assign(g.data.begin() + static_cast<long>(w) * N,
                       g.data.begin() + static_cast<long>(w + 1) * N);
        fft3(dims, ghat[w], false);
    }
    PairBlockVector out;
    out.dims = dims;
    out.p = p;
    out.data.assign(g.data.size(), 0.0);
    std::vector<cplx> acc(N);
    for (size_t w1 = 0; w1 < win.size(); ++w1) {
        std::fill(acc.begin(), acc.end(), cplx(0, 0));
        bool any = false;
        for (size_t w2 = 0; w2 < win.size(); ++w2) {
            const std::vector<cplx>& spec = transpose ? block_spectrum(win[w2], win[w1])
                                                      : block_spectrum(win[w1], win[w2]);
            if (spec.empty()) continue;
            any = true;
            // (T g)_a = sum_b t(b-a) g_b is a cross-correlation: conjugate
            // spectrum; the transpose is the plain convolution
            if (transpose)
                for (long i = 0; i < N; ++i) acc[i] += spec[i] * ghat[w2][i];
            else
                for (long i = 0; i < N; ++i) acc[i] += std::conj(spec[i]) * ghat[w2][i];
        }
        if (!any) continue;
        fft3(dims, acc, true);
        for (long i = 0; i < N; ++i) out.at(static_cast<int>(w1), i) = acc[i].real();
    }
    return out;
}

} // namespace gridhf
