#include "gridhf/fock.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "gridhf/errors.hpp"

namespace gridhf {

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

void axpy(double alpha, const std::vector<double>& x, std::vector<double>& y) {
    for (size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

std::vector<double> hadamard(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> r(a.size());
    for (size_t i = 0; i < a.size(); ++i) r[i] = a[i] * b[i];
    return r;
}

} // namespace

const char* vee_mode_name(VeeMode m) {
    switch (m) {
        case VeeMode::exact: return "exact";
        case VeeMode::rank1: return "rank1";
        case VeeMode::neglect_residual: return "neglect_residual";
        case VeeMode::refined: return "refined";
    }
    return "unknown";
}

std::string EnergyBreakdown::report() const {
    std::ostringstream os;
    os.precision(12);
    os << "T_e " << T_e << " exact\n";
    os << "V_en " << V_en << " exact\n";
    os << "V_ee " << V_ee << " " << vee_mode_name(mode) << "\n";
    os << "E_total " << E_total << " " << vee_mode_name(mode) << "\n";
    return os.str();
}

Rank1Repulsion fit_rank1_repulsion(const ThreeLevelCirculant& T, FitNorm norm) {
    const std::vector<cplx>& lam = T.spectrum();
    long N = T.size();
    Rank1Repulsion r;
    if (N <= 1) {
        r.alpha = 0.0;
        r.beta = N == 1 ? lam[0].real() : 0.0;
        return r;
    }
    double lam0 = lam[0].real();  // the all-ones vector is the zero-frequency mode
    double sum = 0.0, lo = lam[1].real(), hi = lo;
    for (long k = 1; k < N; ++k) {
        double v = lam[k].real();
        sum += v;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (norm == FitNorm::frobenius)
        r.alpha = sum / static_cast<double>(N - 1);
    else
        r.alpha = 0.5 * (lo + hi);
    r.beta = (lam0 - r.alpha) / static_cast<double>(N);
    double resid = 0.0, total = lam0 * lam0;
    if (norm == FitNorm::frobenius) {
        for (long k = 1; k < N; ++k) {
            double d = lam[k].real() - r.alpha;
            resid += d * d;
            total += lam[k].real() * lam[k].real();
        }
        r.residual_ratio = total > 0.0 ? std::sqrt(resid / total) : 0.0;
    } else {
        double dev = std::max(std::abs(lo - r.alpha), std::abs(hi - r.alpha));
        double top = std::abs(lam0);
        for (long k = 1; k < N; ++k) top = std::max(top, std::abs(lam[k].real()));
        r.residual_ratio = top > 0.0 ? dev / top : 0.0;
    }
    return r;
}

ThreeLevelCirculant build_pair_circulant(const GridSpec& grid, const BasisFamily& basis,
                                         double eta) {
    SeparableFactor s0;
    for (int ax = 0; ax < 3; ++ax) s0.f[ax] = pw_multiply(basis.factor, basis.factor);
    auto z = reduce_double_to_single(s0, s0).first;
    MomentTable mom = compute_moments(z);
    CalibrationTable calib = calibrate_engine(z, eta);
    ThreeLevelCirculant c;
    c.dims = {grid.n[0], grid.n[1], grid.n[2]};
    c.generator.assign(grid.size(), 0.0);
    bool cubic = grid.n[0] == grid.n[1] && grid.n[1] == grid.n[2];
    std::map<std::array<int, 3>, double> cache;  // |min-image| key (sorted when cubic)
    for (long a = 0; a < grid.size(); ++a) {
        auto idx = grid.unflatten(a);
        std::array<int, 3> key;
        for (int ax = 0; ax < 3; ++ax) key[ax] = std::abs(grid.min_image(idx[ax], ax));
        if (cubic) std::sort(key.begin(), key.end());
        auto it = cache.find(key);
        double v;
        if (it != cache.end()) {
            v = it->second;
        } else {
            std::array<double, 3> R = {static_cast<double>(key[0]), static_cast<double>(key[1]),
                                       static_cast<double>(key[2])};
            v = engine_integral(z, mom, R, eta, calib);
            cache.emplace(key, v);
        }
        c.generator[a] = v;
    }
    return c;
}

std::vector<double> HFSystem::apply_A(const std::vector<double>& x) const {
    return BandOperator{A, {grid.n[0], grid.n[1], grid.n[2]}, BandMode::direct}.matvec(x);
}

std::vector<double> HFSystem::apply_Bv(const std::vector<double>& x) const {
    return apply_B(nuclei, W, grid, x);
}

const ThreeLevelCirculant& HFSystem::pair_circulant() const {
    if (!pair_circ_ready_) {
        pair_circ_.dims = {grid.n[0], grid.n[1], grid.n[2]};
        pair_circ_.generator.assign(grid.size(), 0.0);
        const std::vector<double>& vals = T4.t.at({Offset3{}, Offset3{}});
        // circulant column convention: generator[a - b] with column b = 0
        for (long a = 0; a < grid.size(); ++a) {
            auto idx = grid.unflatten(a);
            pair_circ_.generator[grid.wrap(-idx[0], -idx[1], -idx[2])] = vals[a];
        }
        pair_circ_ready_ = true;
    }
    return pair_circ_;
}

const ThreeLevelCirculant& HFSystem::fine_pair_circulant(int K) const {
    auto it = fine_tables.find(K);
    if (it != fine_tables.end()) return it->second;
    GridSpec fine = grid;
    for (int ax = 0; ax < 3; ++ax) fine.n[ax] = grid.n[ax] * K;
    return fine_tables.emplace(K, build_pair_circulant(fine, basis, eta)).first->second;
}

HFSystem assemble_system(const GridSpec& grid, const BasisFamily& basis,
                         const NucleusList& nuclei, double eta) {
    HFSystem sys;
    sys.grid = grid;
    sys.basis = basis;
    sys.nuclei = nuclei;
    sys.eta = eta;
    nuclei.validate(grid);
    auto [S, A] = build_stencils(grid, basis);
    sys.S = S;
    sys.A = A;
    sys.W = build_nuclear_W(grid, basis, eta);
    sys.T4 = build_four_center_table(grid, basis, eta);
    sys.r1 = fit_rank1_repulsion(sys.pair_circulant(), FitNorm::frobenius);
    return sys;
}

PairBlockVector RepulsionKernel::apply(const PairBlockVector& g) const {
    if (!rank1) return four_center->apply_sym(g);
    // alpha I on the whole block space; the rank-1 background couples only
    // the central (delta = 0) block, the one the fit was taken from
    PairBlockVector out = g;
    for (double& v : out.data) v *= alpha;
    std::vector<Offset3> window = block_window(g.p);
    int w0 = 0;
    for (int w = 0; w < static_cast<int>(window.size()); ++w)
        if (window[w] == Offset3{}) w0 = w;
    double s = 0.0;
    for (long a = 0; a < g.n_grid(); ++a) s += g.at(w0, a);
    for (long a = 0; a < g.n_grid(); ++a) out.at(w0, a) += beta * s;
    return out;
}

double kinetic_energy(const HFSystem& sys, const OrbitalSet& orb) {
    double h2 = sys.grid.h * sys.grid.h;
    double e = 0.0;
    for (const auto& c : orb.c) e += dot(c, sys.apply_A(c));
    return e / h2;
}

double nuclear_energy(const HFSystem& sys, const OrbitalSet& orb) {
    double e = 0.0;
    for (const auto& c : orb.c) e += dot(c, sys.apply_Bv(c));
    return -2.0 / sys.grid.h * e;
}

namespace {

RepulsionKernel make_kernel(const HFSystem& sys, VeeMode mode, const FourCenterOperator& fc) {
    RepulsionKernel k;
    if (mode == VeeMode::rank1) {
        k.rank1 = true;
        k.alpha = sys.r1.alpha;
        k.beta = sys.r1.beta;
    } else {
        k.four_center = &fc;
    }
    return k;
}

// fine-grid nodal samples of the orbital pair product for refined(K) mode
std::vector<double> fine_product(const HFSystem& sys, const std::vector<double>& a,
                                 const std::vector<double>& b, int K) {
    const GridSpec& g = sys.grid;
    GridSpec fine = g;
    for (int ax = 0; ax < 3; ++ax) fine.n[ax] = g.n[ax] * K;
    const Piecewise1D& phi = sys.basis.factor;
    int p = sys.basis.degree;
    std::vector<double> out(fine.size());
    for (int fi = 0; fi < fine.n[0]; ++fi)
        for (int fj = 0; fj < fine.n[1]; ++fj)
            for (int fk = 0; fk < fine.n[2]; ++fk) {
                double u[3] = {static_cast<double>(fi) / K, static_cast<double>(fj) / K,
                               static_cast<double>(fk) / K};
                double va = 0.0, vb = 0.0;
                int base[3];
                for (int ax = 0; ax < 3; ++ax) base[ax] = static_cast<int>(std::floor(u[ax] + 0.5));
                for (int di = -p; di <= p; ++di)
                    for (int dj = -p; dj <= p; ++dj)
                        for (int dk = -p; dk <= p; ++dk) {
                            double wgt = phi.eval(u[0] - (base[0] + di)) *
                                         phi.eval(u[1] - (base[1] + dj)) *
                                         phi.eval(u[2] - (base[2] + dk));
                            if (wgt == 0.0) continue;
                            long cell = g.wrap(base[0] + di, base[1] + dj, base[2] + dk);
                            va += a[cell] * wgt;
                            vb += b[cell] * wgt;
                        }
                out[fine.flatten(fi, fj, fk)] = va * vb;
            }
    return out;
}

} // namespace

double electron_energy(const HFSystem& sys, const OrbitalSet& orb, VeeMode mode, int K) {
    int m = orb.m();
    double h = sys.grid.h;
    if (mode == VeeMode::exact || mode == VeeMode::rank1) {
        FourCenterOperator fc(sys.T4);
        RepulsionKernel kern = make_kernel(sys, mode, fc);
        std::vector<PairBlockVector> g(m);
        PairBlockVector z;
        for (int s = 0; s < m; ++s) {
            g[s] = apply_H(orb.c[s], orb.c[s], sys.grid);
            if (s == 0)
                z = g[s];
            else
                for (size_t i = 0; i < z.data.size(); ++i) z.data[i] += g[s].data[i];
        }
        double direct = dot(z.data, kern.apply(z).data);
        double exch = 0.0;
        for (int s = 0; s < m; ++s)
            for (int q = 0; q < m; ++q) {
                PairBlockVector u_sq = apply_H(orb.c[q], orb.c[s], sys.grid);
                PairBlockVector u_qs = apply_H(orb.c[s], orb.c[q], sys.grid);
                exch += dot(u_sq.data, kern.apply(u_qs).data);
            }
        return (2.0 * direct - exch) / h;
    }
    if (mode == VeeMode::neglect_residual || mode == VeeMode::refined) {
        int KK = mode == VeeMode::neglect_residual ? 1 : K;
        const ThreeLevelCirculant& C =
            KK == 1 ? sys.pair_circulant() : sys.fine_pair_circulant(KK);
        std::vector<std::vector<double>> prod(m * m);
        auto at = [&](int s, int q) -> std::vector<double>& { return prod[s * m + q]; };
        for (int s = 0; s < m; ++s)
            for (int q = s; q < m; ++q) {
                at(s, q) = KK == 1 ? hadamard(orb.c[s], orb.c[q])
                                   : fine_product(sys, orb.c[s], orb.c[q], KK);
                if (q != s) at(q, s) = at(s, q);
            }
        std::vector<double> zn(at(0, 0).size(), 0.0);
        for (int s = 0; s < m; ++s) axpy(1.0, at(s, s), zn);
        std::vector<double> Cz = C.matvec(zn);
        double direct = dot(zn, Cz);
        double exch = 0.0;
        for (int s = 0; s < m; ++s)
            for (int q = 0; q < m; ++q) exch += dot(at(s, q), C.matvec(at(q, s)));
        double scale = 1.0 / (h * std::pow(static_cast<double>(KK), 5));
        return scale * (2.0 * direct - exch);
    }
    throw ParseError("unknown V_ee mode");
}

EnergyBreakdown total_energy(const HFSystem& sys, const OrbitalSet& orb, VeeMode mode, int K) {
    EnergyBreakdown e;
    e.mode = mode;
    e.T_e = kinetic_energy(sys, orb);
    e.V_en = nuclear_energy(sys, orb);
    e.V_ee = electron_energy(sys, orb, mode, K);
    e.E_total = e.T_e + e.V_en + e.V_ee;
    return e;
}

std::vector<std::vector<double>> gradient(const HFSystem& sys, const OrbitalSet& orb,
                                          VeeMode mode) {
    int m = orb.m();
    double h = sys.grid.h;
    double h2 = h * h;
    std::vector<std::vector<double>> grad(m);

    FourCenterOperator fc(sys.T4);
    bool vee_kernel = mode == VeeMode::exact || mode == VeeMode::rank1;
    RepulsionKernel kern = make_kernel(sys, mode, fc);

    std::vector<PairBlockVector> g(m);
    PairBlockVector w;  // kernel-applied total pair density
    std::vector<double> zn;
    std::vector<double> Czn;
    if (vee_kernel) {
        for (int s = 0; s < m; ++s) {
            g[s] = apply_H(orb.c[s], orb.c[s], sys.grid);
            if (s == 0)
                w = g[s];
            else
                for (size_t i = 0; i < w.data.size(); ++i) w.data[i] += g[s].data[i];
        }
        w = kern.apply(w);
    } else if (mode == VeeMode::neglect_residual) {
        zn.assign(orb.n(), 0.0);
        for (int s = 0; s < m; ++s) axpy(1.0, hadamard(orb.c[s], orb.c[s]), zn);
        Czn = sys.pair_circulant().matvec(zn);
    } else {
        throw UnsupportedBasisError("gradient is implemented for exact, rank1 and "
                                    "neglect_residual repulsion modes");
    }

    for (int i = 0; i < m; ++i) {
        std::vector<double> d = sys.apply_A(orb.c[i]);
        for (double& v : d) v *= 2.0 / h2;
        axpy(-4.0 / h, sys.apply_Bv(orb.c[i]), d);
        if (vee_kernel) {
            // direct term: (4/h) [adjA + adjB](c_i, w)
            axpy(4.0 / h, apply_H_adjoint(orb.c[i], w, sys.grid), d);
            axpy(4.0 / h, apply_H_source_adjoint(orb.c[i], w, sys.grid), d);
            // exchange term
            for (int s = 0; s < m; ++s) {
                PairBlockVector u_si = apply_H(orb.c[i], orb.c[s], sys.grid);
                PairBlockVector u_is = apply_H(orb.c[s], orb.c[i], sys.grid);
                axpy(-2.0 / h, apply_H_adjoint(orb.c[s], kern.apply(u_si), sys.grid), d);
                axpy(-2.0 / h, apply_H_source_adjoint(orb.c[s], kern.apply(u_is), sys.grid), d);
            }
        } else {
            const ThreeLevelCirculant& C = sys.pair_circulant();
            axpy(8.0 / h, hadamard(orb.c[i], Czn), d);
            for (int s = 0; s < m; ++s)
                axpy(-4.0 / h, hadamard(orb.c[s], C.matvec(hadamard(orb.c[s], orb.c[i]))), d);
        }
        if (!orb.eps.empty()) axpy(-orb.eps[i], orb.c[i], d);
        grad[i] = std::move(d);
    }
    return grad;
}

std::vector<std::vector<double>> hessian_matvec_p0(const HFSystem& sys, const OrbitalSet& orb,
                                                   const std::vector<std::vector<double>>& x,
                                                   VeeMode mode) {
    if (sys.basis.degree != 0)
        throw UnsupportedBasisError("the second-derivative formulas are given only for p = 0");
    int m = orb.m();
    double h = sys.grid.h;
    double h2 = h * h;
    auto Tv = [&](const std::vector<double>& v) {
        if (mode == VeeMode::rank1) {
            double s = 0.0;
            for (double u : v) s += u;
            std::vector<double> r(v.size());
            for (size_t i = 0; i < v.size(); ++i) r[i] = sys.r1.alpha * v[i] + sys.r1.beta * s;
            return r;
        }
        return sys.pair_circulant().matvec(v);
    };
    std::vector<double> zn(orb.n(), 0.0);
    for (int s = 0; s < m; ++s) axpy(1.0, hadamard(orb.c[s], orb.c[s]), zn);
    std::vector<double> Tz = Tv(zn);

    std::vector<std::vector<double>> y(m);
    for (int i = 0; i < m; ++i) {
        std::vector<double> d = sys.apply_A(x[i]);
        for (double& v : d) v *= 2.0 / h2;
        axpy(-4.0 / h, sys.apply_Bv(x[i]), d);
        // 2 diag(T z) from the total density plus the i-i correction
        axpy(8.0 / h, hadamard(x[i], Tz), d);
        axpy(-4.0 / h, hadamard(x[i], Tv(hadamard(orb.c[i], orb.c[i]))), d);
        for (int s = 0; s < m; ++s)
            axpy(-4.0 / h, hadamard(orb.c[s], Tv(hadamard(orb.c[s], x[i]))), d);
        axpy(12.0 / h, hadamard(orb.c[i], Tv(hadamard(orb.c[i], x[i]))), d);
        if (!orb.eps.empty()) axpy(-orb.eps[i], x[i], d);
        for (int j = 0; j < m; ++j) {
            if (j == i) continue;
            axpy(16.0 / h, hadamard(orb.c[i], Tv(hadamard(orb.c[j], x[j]))), d);
            axpy(-4.0 / h, hadamard(orb.c[j], Tv(hadamard(orb.c[i], x[j]))), d);
            axpy(-4.0 / h, hadamard(x[j], Tv(hadamard(orb.c[i], orb.c[j]))), d);
        }
        y[i] = std::move(d);
    }
    return y;
}

RepulsionKernel FockOperator::kernel() const {
    RepulsionKernel k;
    if (mode == VeeMode::rank1) {
        k.rank1 = true;
        k.alpha = sys->r1.alpha;
        k.beta = sys->r1.beta;
    } else {
        k.four_center = fc.get();
    }
    return k;
}

std::vector<double> FockOperator::apply(const std::vector<double>& x) const {
    double h = sys->grid.h;
    double h2 = h * h;
    std::vector<double> y = sys->apply_A(x);
    for (double& v : y) v *= 2.0 / h2;
    axpy(-4.0 / h, sys->apply_Bv(x), y);
    if (!has_vee) return y;
    RepulsionKernel kern = kernel();
    // Coulomb: (4/h) [adjA + adjB](x, w)
    axpy(4.0 / h, apply_H_adjoint(x, w, sys->grid), y);
    axpy(4.0 / h, apply_H_source_adjoint(x, w, sys->grid), y);
    // exchange: -(2/h) sum_s [adjA(c_s, T H(x) c_s) + adjB(c_s, T H(c_s) x)]
    for (const std::vector<double>& cs : orbitals) {
        PairBlockVector u1 = apply_H(x, cs, sys->grid);
        PairBlockVector u2 = apply_H(cs, x, sys->grid);
        axpy(-2.0 / h, apply_H_adjoint(cs, kern.apply(u1), sys->grid), y);
        axpy(-2.0 / h, apply_H_source_adjoint(cs, kern.apply(u2), sys->grid), y);
    }
    return y;
}

FockOperator make_fock_operator(const HFSystem& sys, const OrbitalSet& prev, VeeMode mode) {
    if (mode != VeeMode::exact && mode != VeeMode::rank1)
        throw UnsupportedBasisError("the SCF linear operator supports exact and rank1 modes");
    FockOperator f;
    f.sys = &sys;
    f.mode = mode;
    f.orbitals = prev.c;
    f.has_vee = true;
    f.fc = std::make_shared<FourCenterOperator>(sys.T4);
    PairBlockVector z;
    for (int s = 0; s < prev.m(); ++s) {
        PairBlockVector g = apply_H(prev.c[s], prev.c[s], sys.grid);
        if (s == 0)
            z = g;
        else
            for (size_t i = 0; i < z.data.size(); ++i) z.data[i] += g.data[i];
    }
    f.w = f.kernel().apply(z);
    return f;
}

FockOperator make_core_operator(const HFSystem& sys) {
    FockOperator f;
    f.sys = &sys;
    f.has_vee = false;
    return f;
}

namespace {

void check_orthonormal(const std::vector<std::vector<double>>& frame) {
    for (size_t i = 0; i < frame.size(); ++i)
        for (size_t j = i; j < frame.size(); ++j) {
            double want = i == j ? 1.0 : 0.0;
            if (std::abs(dot(frame[i], frame[j]) - want) > 1e-8)
                throw DimensionError("frame is not orthonormal");
        }
}

} // namespace

double direct_energy_dense(const std::vector<std::vector<double>>& H, const std::vector<double>& G,
                           const std::vector<std::vector<double>>& frame, int m) {
    check_orthonormal(frame);
    int N = static_cast<int>(frame.size());
    std::vector<double> P(static_cast<size_t>(N) * N, 0.0);
    for (int i = 0; i < m; ++i)
        for (int p = 0; p < N; ++p)
            for (int q = 0; q < N; ++q) P[p * N + q] += frame[i][p] * frame[i][q];
    double e = 0.0;
    for (int p = 0; p < N; ++p)
        for (int q = 0; q < N; ++q) e += 2.0 * H[p][q] * P[p * N + q];
    for (int p = 0; p < N; ++p)
        for (int q = 0; q < N; ++q)
            for (int r = 0; r < N; ++r)
                for (int s = 0; s < N; ++s)
                    e += G[((static_cast<size_t>(p) * N + q) * N + r) * N + s] * P[p * N + q] *
                         P[r * N + s];
    return e;
}

double complement_energy(const std::vector<std::vector<double>>& H, const std::vector<double>& G,
                         const std::vector<std::vector<double>>& frame, int m) {
    check_orthonormal(frame);
    int N = static_cast<int>(frame.size());
    auto Gv = [&](int p, int q, int r, int s) {
        return G[((static_cast<size_t>(p) * N + q) * N + r) * N + s];
    };
    std::vector<double> Q(static_cast<size_t>(N) * N, 0.0);
    for (int k = m; k < N; ++k)
        for (int p = 0; p < N; ++p)
            for (int q = 0; q < N; ++q) Q[p * N + q] += frame[k][p] * frame[k][q];
    // constant term of Eq. (4.2.4.1)
    double e = 0.0;
    for (int p = 0; p < N; ++p) {
        e += 2.0 * H[p][p];
        for (int r = 0; r < N; ++r) e += Gv(p, p, r, r);
    }
    // linear term in the complement projector
    for (int p = 0; p < N; ++p)
        for (int q = 0; q < N; ++q) {
            double coeff = -2.0 * H[p][q];
            for (int r = 0; r < N; ++r) coeff -= Gv(p, q, r, r) + Gv(r, r, p, q);
            e += coeff * Q[p * N + q];
        }
    // quadratic term of Eq. (4.2.4.2)
    for (int p = 0; p < N; ++p)
        for (int q = 0; q < N; ++q)
            for (int r = 0; r < N; ++r)
                for (int s = 0; s < N; ++s) e += Gv(p, q, r, s) * Q[p * N + q] * Q[r * N + s];
    return e;
}

ProductProjection project_product_to_grid(const std::vector<double>& a,
                                          const std::vector<double>& b, const GridSpec& grid,
                                          const BasisFamily& basis) {
    if (basis.degree > 1) throw UnsupportedBasisError("product projection needs degree <= 1");
    ProductProjection out;
    out.xi.resize(grid.size());
    // the basis factors are cardinal at the nodes, so the nodal values of the
    // product are just the coefficient products
    for (long i = 0; i < grid.size(); ++i) out.xi[i] = a[i] * b[i];
    if (basis.degree == 0) return out;  // exactly representable

    const Piecewise1D& phi = basis.factor;
    auto eval = [&](const std::vector<double>& c, const double u[3]) {
        double v = 0.0;
        int base[3];
        for (int ax = 0; ax < 3; ++ax) base[ax] = static_cast<int>(std::floor(u[ax] + 0.5));
        for (int di = -1; di <= 1; ++di)
            for (int dj = -1; dj <= 1; ++dj)
                for (int dk = -1; dk <= 1; ++dk) {
                    double wgt = phi.eval(u[0] - (base[0] + di)) * phi.eval(u[1] - (base[1] + dj)) *
                                 phi.eval(u[2] - (base[2] + dk));
                    if (wgt != 0.0) v += c[grid.wrap(base[0] + di, base[1] + dj, base[2] + dk)] * wgt;
                }
        return v;
    };
    for (int i = 0; i < grid.n[0]; ++i)
        for (int j = 0; j < grid.n[1]; ++j)
            for (int k = 0; k < grid.n[2]; ++k) {
                double u[3] = {static_cast<double>(i), static_cast<double>(j),
                               static_cast<double>(k)};
                double node = eval(a, u) * eval(b, u) - eval(out.xi, u);
                out.node_residual = std::max(out.node_residual, std::abs(node));
                double um[3] = {i + 0.5, j + 0.5, k + 0.5};
                double mid = eval(a, um) * eval(b, um) - eval(out.xi, um);
                out.cell_residual = std::max(out.cell_residual, std::abs(mid));
            }
    return out;
}

NormRatioPoint norm_ratio_diagnostics(const HFSystem& sys) {
    NormRatioPoint pt;
    pt.n = sys.grid.n[0];
    pt.N = sys.grid.size();
    double h = sys.grid.h;
    long N = sys.grid.size();

    ThreeLevelCirculant Ac =
        ThreeLevelCirculant::from_stencil(sys.A, {sys.grid.n[0], sys.grid.n[1], sys.grid.n[2]});
    double te_fro2 = 0.0, te_spec = 0.0;
    for (const cplx& lam : Ac.spectrum()) {
        double v = lam.real() / (h * h);
        te_fro2 += v * v;
        te_spec = std::max(te_spec, std::abs(v));
    }

    // V_en: assemble B row by row from the nuclear table
    double ven_fro2 = 0.0;
    for (const auto& [off, vals] : sys.W.w)
        for (long a = 0; a < N; ++a) {
            auto ia = sys.grid.unflatten(a);
            double entry = 0.0;
            for (const Nucleus& nuc : sys.nuclei.entries)
                entry += nuc.charge * vals[sys.grid.wrap(ia[0] - nuc.cell[0], ia[1] - nuc.cell[1],
                                                         ia[2] - nuc.cell[2])];
            ven_fro2 += (2.0 / h) * (2.0 / h) * entry * entry;
        }
    // spectral norm of B by power iteration on the symmetrized application
    std::vector<double> v(N);
    for (long i = 0; i < N; ++i) v[i] = 1.0 / std::sqrt(static_cast<double>(N));
    double ven_spec = 0.0;
    for (int it = 0; it < 60; ++it) {
        std::vector<double> bv = sys.apply_Bv(v);
        double nrm = std::sqrt(std::max(1e-300, [&] {
            double s = 0.0;
            for (double x : bv) s += x * x;
            return s;
        }()));
        ven_spec = nrm;
        for (long i = 0; i < N; ++i) v[i] = bv[i] / nrm;
    }
    ven_spec *= 2.0 / h;

    // V_ee: mean-field repulsion of a unit nodal pair density at cell 0,
    // (4/h) (2 J - K) with J = diag(t(a)) and K = t(0) e0 e0^T; a diagonal
    // matrix with entries 2 t(a), except t(0) on the density's own cell.
    // Scaled by the same half used for T_e and V_en above.
    const std::vector<double>& gen = sys.pair_circulant().generator;
    double vee_fro2 = 0.0, vee_spec = 0.0;
    for (long a = 0; a < N; ++a) {
        double x = (a == 0 ? gen[0] : 2.0 * gen[a]) * 2.0 / h;
        vee_fro2 += x * x;
        vee_spec = std::max(vee_spec, std::abs(x));
    }

    pt.fro_en = ven_fro2 > 0.0 ? te_fro2 / ven_fro2 : std::numeric_limits<double>::infinity();
    pt.fro_ee = vee_fro2 > 0.0 ? te_fro2 / vee_fro2 : std::numeric_limits<double>::infinity();
    pt.spec_en = ven_spec > 0.0 ? te_spec / ven_spec : std::numeric_limits<double>::infinity();
    pt.spec_ee = vee_spec > 0.0 ? te_spec / vee_spec : std::numeric_limits<double>::infinity();
    return pt;
}

} // namespace gridhf
