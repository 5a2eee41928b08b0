#pragma once
#include <functional>
#include <vector>

#include "fft.hpp"
#include "grid.hpp"
#include "stencil.hpp"

namespace gridhf {

// Three-level circulant C[a][b] = generator[wrap(a-b)]; the generator is the
// first column reshaped. Diagonalized by the 3-D Fourier transform.
struct ThreeLevelCirculant {
    std::array<int, 3> dims{0, 0, 0};
    std::vector<double> generator;

    long size() const { return static_cast<long>(dims[0]) * dims[1] * dims[2]; }
    const std::vector<cplx>& spectrum() const;
    std::vector<double> matvec(const std::vector<double>& v) const;

    // Circulant whose matvec agrees with the band application of the stencil.
    static ThreeLevelCirculant from_stencil(const StencilTable& s, const std::array<int, 3>& dims);
    static ThreeLevelCirculant delta(const std::array<int, 3>& dims);

    // Spectrum map lambda -> phi(lambda + shift); requires a real spectrum.
    ThreeLevelCirculant apply_function(const std::function<double(double)>& phi,
                                       double shift = 0.0) const;

  private:
    mutable std::vector<cplx> spectrum_;
};

enum class BandMode { direct, via_circulant };

// Band operator y_a = sum_delta s(delta) x[a + delta] on the periodic grid.
struct BandOperator {
    StencilTable stencil;
    std::array<int, 3> dims{0, 0, 0};
    BandMode mode = BandMode::direct;

    long size() const { return static_cast<long>(dims[0]) * dims[1] * dims[2]; }
    std::vector<double> matvec(const std::vector<double>& v) const;
};

// Picks the band application path by timing both once on this grid.
BandMode measure_band_crossover(const StencilTable& s, const std::array<int, 3>& dims);

// Permutation that moves the element at (0,0,0) to (i,j,k).
struct ShiftPermutation {
    std::array<int, 3> shift{0, 0, 0};
    std::array<int, 3> dims{0, 0, 0};
    std::vector<double> apply(const std::vector<double>& v) const;
    ShiftPermutation inverse() const;
};

// Nuclear-attraction operator B = sum_s Q_s P(r_s) W P(-r_s).
std::vector<double> apply_B(const NucleusList& nuclei, const NuclearTable& W,
                            const GridSpec& grid, const std::vector<double>& v);

// Pair-block vector g[(a, delta)] over the (2p+1)^3 offset window, stored
// block-major: data[w * N + a] for window index w.
struct PairBlockVector {
    std::array<int, 3> dims{0, 0, 0};
    int p = 0;
    std::vector<double> data;

    long n_grid() const { return static_cast<long>(dims[0]) * dims[1] * dims[2]; }
    int n_blocks() const { return (2 * p + 1) * (2 * p + 1) * (2 * p + 1); }
    double& at(int w, long a) { return data[static_cast<long>(w) * n_grid() + a]; }
    double at(int w, long a) const { return data[static_cast<long>(w) * n_grid() + a]; }
};

// Window offset enumeration shared by apply_H and the T-block operator.
std::vector<Offset3> block_window(int p);

// H(c): g[(a, delta)] = c[a + delta] * x[a]; p = 0 degenerates to diag(c).
PairBlockVector apply_H(const std::vector<double>& c, const std::vector<double>& x,
                        const GridSpec& grid);
// Adjoint action H*(c): y[a] = sum_delta c[a + delta] * g[(a, delta)].
std::vector<double> apply_H_adjoint(const std::vector<double>& c, const PairBlockVector& g,
                                    const GridSpec& grid);
// Adjoint of the source slot, dc -> H(dc) c: y[b] = sum_delta c[b - delta] * g[(b - delta, delta)].
std::vector<double> apply_H_source_adjoint(const std::vector<double>& c, const PairBlockVector& g,
                                           const GridSpec& grid);

// Block-circulant four-center operator (T g)[(a,d)] = sum_{b,d'} t(d, b-a, d') g[(b,d')],
// applied spectrally: one FFT per block plus (2p+1)^6 pointwise multiplies.
struct FourCenterOperator {
    const FourCenterTable* table = nullptr;
    std::array<int, 3> dims{0, 0, 0};
    int p = 0;

    explicit FourCenterOperator(const FourCenterTable& t) : table(&t), dims(t.dims), p(t.p) {}
    PairBlockVector apply(const PairBlockVector& g, bool transpose = false) const;
    // (T + T^T)/2: exactly symmetric even where min-image wrapping breaks the
    // stored table's swap symmetry on small grids
    PairBlockVector apply_sym(const PairBlockVector& g) const;

  private:
    mutable std::map<std::pair<Offset3, Offset3>, std::vector<cplx>> spectra_;
    const std::vector<cplx>& block_spectrum(const Offset3& d1, const Offset3& d2) const;
};

} // namespace gridhf
