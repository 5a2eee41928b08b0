#include "gridhf/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

#include <Eigen/Dense>

#include "gridhf/errors.hpp"

namespace gridhf {

namespace {

int wrap1(int i, int n) { return ((i % n) + n) % n; }

double col_dot(const std::vector<double>& a, int ra, const std::vector<double>& b, int rb, int n) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += a[static_cast<long>(ra) * n + i] * b[static_cast<long>(rb) * n + i];
    return s;
}

} // namespace

std::vector<double> CanonicalTensor::densify() const {
    std::vector<double> out(size(), 0.0);
    for (int r = 0; r < rank(); ++r) {
        const double* u = factors[0].data() + static_cast<long>(r) * dims[0];
        const double* v = factors[1].data() + static_cast<long>(r) * dims[1];
        const double* t = factors[2].data() + static_cast<long>(r) * dims[2];
        long idx = 0;
        for (int i = 0; i < dims[0]; ++i)
            for (int j = 0; j < dims[1]; ++j) {
                double uv = weights[r] * u[i] * v[j];
                for (int k = 0; k < dims[2]; ++k) out[idx++] += uv * t[k];
            }
    }
    return out;
}

void CanonicalTensor::normalize() {
    int R = rank();
    for (int r = 0; r < R; ++r) {
        for (int ax = 0; ax < 3; ++ax) {
            double* col = factors[ax].data() + static_cast<long>(r) * dims[ax];
            double nrm = 0.0;
            for (int i = 0; i < dims[ax]; ++i) nrm += col[i] * col[i];
            nrm = std::sqrt(nrm);
            if (nrm == 0.0) {
                // keep the unit-column invariant even for vanished terms
                col[0] = 1.0;
                weights[r] = 0.0;
                continue;
            }
            for (int i = 0; i < dims[ax]; ++i) col[i] /= nrm;
            weights[r] *= nrm;
        }
        if (weights[r] < 0.0) {
            weights[r] = -weights[r];
            double* col = factors[0].data() + static_cast<long>(r) * dims[0];
            for (int i = 0; i < dims[0]; ++i) col[i] = -col[i];
        }
    }
    // sort columns by weight, nonincreasing
    std::vector<int> order(R);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return weights[a] > weights[b]; });
    CanonicalTensor tmp = *this;
    for (int r = 0; r < R; ++r) {
        weights[r] = tmp.weights[order[r]];
        for (int ax = 0; ax < 3; ++ax)
            std::copy_n(tmp.factors[ax].begin() + static_cast<long>(order[r]) * dims[ax], dims[ax],
                        factors[ax].begin() + static_cast<long>(r) * dims[ax]);
    }
}

CanonicalTensor CanonicalTensor::zero(const std::array<int, 3>& dims) {
    CanonicalTensor t;
    t.dims = dims;
    return t;
}

CanonicalTensor CanonicalTensor::from_dense(const std::array<int, 3>& dims,
                                            const std::vector<double>& data) {
    if (static_cast<long>(data.size()) != static_cast<long>(dims[0]) * dims[1] * dims[2])
        throw DimensionError("dense tensor size does not match dims");
    CanonicalTensor t;
    t.dims = dims;
    for (int i = 0; i < dims[0]; ++i)
        for (int j = 0; j < dims[1]; ++j) {
            const double* slice = data.data() + (static_cast<long>(i) * dims[1] + j) * dims[2];
            double nrm = 0.0;
            for (int k = 0; k < dims[2]; ++k) nrm += slice[k] * slice[k];
            if (nrm == 0.0) continue;
            int r = t.rank();
            t.weights.push_back(1.0);
            for (int ax = 0; ax < 3; ++ax)
                t.factors[ax].resize(static_cast<long>(r + 1) * dims[ax], 0.0);
            t.factors[0][static_cast<long>(r) * dims[0] + i] = 1.0;
            t.factors[1][static_cast<long>(r) * dims[1] + j] = 1.0;
            std::copy_n(slice, dims[2], t.factors[2].begin() + static_cast<long>(r) * dims[2]);
        }
    t.normalize();
    return t;
}

double tensor_dot(const CanonicalTensor& a, const CanonicalTensor& b) {
    if (a.dims != b.dims) throw DimensionError("tensor dims mismatch in dot");
    double s = 0.0;
    for (int r = 0; r < a.rank(); ++r)
        for (int q = 0; q < b.rank(); ++q) {
            double p = a.weights[r] * b.weights[q];
            for (int ax = 0; ax < 3; ++ax)
                p *= col_dot(a.factors[ax], r, b.factors[ax], q, a.dims[ax]);
            s += p;
        }
    return s;
}

double tensor_norm(const CanonicalTensor& a) { return std::sqrt(std::max(0.0, tensor_dot(a, a))); }

std::vector<double> TensorOperator::densify() const {
    long N = static_cast<long>(dims[0]) * dims[1] * dims[2];
    std::vector<double> out(N * N, 0.0);
    for (const Term& t : terms)
        for (int i0 = 0; i0 < dims[0]; ++i0)
            for (int j0 = 0; j0 < dims[0]; ++j0) {
                double m0 = t.coeff * t.M[0][static_cast<long>(i0) * dims[0] + j0];
                if (m0 == 0.0) continue;
                for (int i1 = 0; i1 < dims[1]; ++i1)
                    for (int j1 = 0; j1 < dims[1]; ++j1) {
                        double m1 = m0 * t.M[1][static_cast<long>(i1) * dims[1] + j1];
                        if (m1 == 0.0) continue;
                        for (int i2 = 0; i2 < dims[2]; ++i2)
                            for (int j2 = 0; j2 < dims[2]; ++j2) {
                                double m2 = m1 * t.M[2][static_cast<long>(i2) * dims[2] + j2];
                                long row = (static_cast<long>(i0) * dims[1] + i1) * dims[2] + i2;
                                long col = (static_cast<long>(j0) * dims[1] + j1) * dims[2] + j2;
                                out[row * N + col] += m2;
                            }
                    }
            }
    return out;
}

CanonicalTensor tensor_matvec(const TensorOperator& op, const CanonicalTensor& x) {
    if (op.dims != x.dims) throw DimensionError("operator/tensor dims mismatch");
    CanonicalTensor y;
    y.dims = x.dims;
    int R = x.rank();
    y.weights.reserve(static_cast<size_t>(op.rank()) * R);
    for (int ax = 0; ax < 3; ++ax)
        y.factors[ax].reserve(static_cast<size_t>(op.rank()) * R * x.dims[ax]);
    for (const TensorOperator::Term& t : op.terms)
        for (int r = 0; r < R; ++r) {
            y.weights.push_back(t.coeff * x.weights[r]);
            for (int ax = 0; ax < 3; ++ax) {
                int n = x.dims[ax];
                const double* col = x.factors[ax].data() + static_cast<long>(r) * n;
                std::vector<double> out(n, 0.0);
                for (int i = 0; i < n; ++i) {
                    double s = 0.0;
                    const double* row = t.M[ax].data() + static_cast<long>(i) * n;
                    for (int j = 0; j < n; ++j) s += row[j] * col[j];
                    out[i] = s;
                }
                y.factors[ax].insert(y.factors[ax].end(), out.begin(), out.end());
            }
        }
    y.normalize();
    return y;
}

namespace {

// one ALS pass over the three axes; factors of `x` updated in place
void als_sweep(CanonicalTensor& x, const CanonicalTensor& y) {
    int R = x.rank(), Ry = y.rank();
    for (int ax = 0; ax < 3; ++ax) {
        int n = x.dims[ax];
        int b1 = (ax + 1) % 3, b2 = (ax + 2) % 3;
        Eigen::MatrixXd G(R, R);
        for (int r = 0; r < R; ++r)
            for (int q = 0; q < R; ++q)
                G(r, q) = col_dot(x.factors[b1], r, x.factors[b1], q, x.dims[b1]) *
                          col_dot(x.factors[b2], r, x.factors[b2], q, x.dims[b2]);
        Eigen::MatrixXd P(n, R);
        P.setZero();
        for (int s = 0; s < Ry; ++s) {
            for (int r = 0; r < R; ++r) {
                double k = y.weights[s] *
                           col_dot(y.factors[b1], s, x.factors[b1], r, x.dims[b1]) *
                           col_dot(y.factors[b2], s, x.factors[b2], r, x.dims[b2]);
                if (k == 0.0) continue;
                const double* ys = y.factors[ax].data() + static_cast<long>(s) * n;
                for (int i = 0; i < n; ++i) P(i, r) += k * ys[i];
            }
        }
        double ridge = 1e-13 * (G.trace() + 1e-300);
        G.diagonal().array() += ridge;
        Eigen::MatrixXd A = G.ldlt().solve(P.transpose()).transpose();
        for (int r = 0; r < R; ++r) {
            double* col = x.factors[ax].data() + static_cast<long>(r) * n;
            for (int i = 0; i < n; ++i) col[i] = A(i, r);
            x.weights[r] = 1.0;  // scale now lives in the raw column
        }
        x.normalize();
    }
}

CanonicalTensor random_cp(const std::array<int, 3>& dims, int R, std::mt19937& rng) {
    CanonicalTensor t;
    t.dims = dims;
    t.weights.assign(R, 1.0);
    std::normal_distribution<double> nd;
    for (int ax = 0; ax < 3; ++ax) {
        t.factors[ax].resize(static_cast<long>(R) * dims[ax]);
        for (double& v : t.factors[ax]) v = nd(rng);
    }
    t.normalize();
    return t;
}

CanonicalTensor top_columns(const CanonicalTensor& y, int R, std::mt19937& rng) {
    CanonicalTensor t;
    t.dims = y.dims;
    int have = std::min(R, y.rank());
    t.weights.assign(y.weights.begin(), y.weights.begin() + have);
    for (int ax = 0; ax < 3; ++ax)
        t.factors[ax].assign(y.factors[ax].begin(),
                             y.factors[ax].begin() + static_cast<long>(have) * y.dims[ax]);
    if (have < R) {
        CanonicalTensor pad = random_cp(y.dims, R - have, rng);
        t.weights.insert(t.weights.end(), pad.weights.begin(), pad.weights.end());
        for (int ax = 0; ax < 3; ++ax)
            t.factors[ax].insert(t.factors[ax].end(), pad.factors[ax].begin(),
                                 pad.factors[ax].end());
    }
    return t;
}

} // namespace

namespace {

// signed Gram inner product plus the sum of term magnitudes (the latter
// bounds the rounding noise of the former)
std::pair<double, double> gram_dot(const CanonicalTensor& a, const CanonicalTensor& b) {
    double s = 0.0, mag = 0.0;
    for (int r = 0; r < a.rank(); ++r)
        for (int q = 0; q < b.rank(); ++q) {
            double p = a.weights[r] * b.weights[q];
            for (int ax = 0; ax < 3; ++ax)
                p *= col_dot(a.factors[ax], r, b.factors[ax], q, a.dims[ax]);
            s += p;
            mag += std::abs(p);
        }
    return {s, mag};
}

// merge columns whose factor triples are parallel (they defeat the ALS
// normal equations and inflate the presented rank)
CanonicalTensor coalesce(const CanonicalTensor& x) {
    CanonicalTensor out;
    out.dims = x.dims;
    for (int r = 0; r < x.rank(); ++r) {
        double w = x.weights[r];
        bool merged = false;
        for (int q = 0; q < out.rank() && !merged; ++q) {
            double sign = 1.0;
            bool parallel = true;
            for (int ax = 0; ax < 3 && parallel; ++ax) {
                double c = col_dot(x.factors[ax], r, out.factors[ax], q, x.dims[ax]);
                if (std::abs(c) < 1.0 - 1e-12)
                    parallel = false;
                else
                    sign *= c < 0.0 ? -1.0 : 1.0;
            }
            if (parallel) {
                out.weights[q] += sign * w;
                merged = true;
            }
        }
        if (!merged) {
            out.weights.push_back(w);
            for (int ax = 0; ax < 3; ++ax)
                out.factors[ax].insert(out.factors[ax].end(),
                                       x.factors[ax].begin() + static_cast<long>(r) * x.dims[ax],
                                       x.factors[ax].begin() +
                                           static_cast<long>(r + 1) * x.dims[ax]);
        }
    }
    out.normalize();
    double maxw = out.weights.empty() ? 0.0 : out.weights.front();
    while (!out.weights.empty() && out.weights.back() <= 1e-15 * maxw) {
        out.weights.pop_back();
        for (int ax = 0; ax < 3; ++ax) out.factors[ax].resize(out.weights.size() * out.dims[ax]);
    }
    return out;
}

} // namespace

CompressResult compress(const CanonicalTensor& x0, double tol, int R_max, unsigned seed) {
    CompressResult best;
    best.tensor = CanonicalTensor::zero(x0.dims);
    CanonicalTensor x = coalesce(x0);
    double yy = tensor_dot(x, x);
    if (yy <= 0.0 || x.rank() == 0) {
        best.rel_error = 0.0;
        best.achieved = true;
        return best;
    }
    double ynorm = std::sqrt(yy);
    // small tensors get the exact dense fit error; large ones the Gram
    // estimate, floored by its own cancellation noise so a degenerate fit
    // (huge cancelling terms) cannot report a spurious zero
    bool small = x.size() <= 32768;
    std::vector<double> xd;
    if (small) xd = x.densify();
    auto fit_error = [&](const CanonicalTensor& cand) {
        if (small) {
            std::vector<double> cd = cand.densify();
            double e = 0.0;
            for (long i = 0; i < x.size(); ++i) e += (cd[i] - xd[i]) * (cd[i] - xd[i]);
            return std::sqrt(e) / ynorm;
        }
        auto [xx, xx_mag] = gram_dot(cand, cand);
        auto [xy, xy_mag] = gram_dot(cand, x);
        double err2 = xx - 2.0 * xy + yy;
        double noise = 1e-14 * (xx_mag + 2.0 * xy_mag + yy);
        return std::sqrt(std::max(err2, noise)) / ynorm;
    };
    best.rel_error = 1.0;  // error of the zero tensor
    std::mt19937 rng(seed);

    for (int R = 1; R <= std::max(1, R_max); ++R) {
        for (int attempt = 0; attempt < 3; ++attempt) {
            CanonicalTensor cand =
                attempt == 0 ? top_columns(x, R, rng) : random_cp(x.dims, R, rng);
            double prev = std::numeric_limits<double>::infinity();
            double rel = 1.0;
            for (int sweep = 0; sweep < 200; ++sweep) {
                als_sweep(cand, x);
                rel = fit_error(cand);
                // run to stationarity so the fit quality reflects the rank,
                // not the tolerance
                if (prev - rel < 1e-14 * (1.0 + rel)) break;
                prev = rel;
            }
            if (rel < best.rel_error) {
                best.rel_error = rel;
                best.tensor = cand;
            }
            if (best.rel_error <= tol) break;
        }
        if (best.rel_error <= tol) break;
    }
    best.achieved = best.rel_error <= tol;
    return best;
}

namespace {

Piecewise1D pw_derivative(const Piecewise1D& f) {
    Piecewise1D d = f;
    for (Poly& p : d.pieces) p = p.derivative();
    return d;
}

// periodic 1-D band matrix from offset values, entry [i][j] = vals(j - i)
std::vector<double> circulant_band_1d(int n, int p, const std::vector<double>& vals) {
    std::vector<double> M(static_cast<long>(n) * n, 0.0);
    for (int i = 0; i < n; ++i)
        for (int d = -p; d <= p; ++d) M[static_cast<long>(i) * n + wrap1(i + d, n)] += vals[d + p];
    return M;
}

} // namespace

DecomposeResult decompose_operator(OperatorKind kind, const HFSystem& sys, double tol,
                                   int R_max) {
    const GridSpec& g = sys.grid;
    std::array<int, 3> dims = {g.n[0], g.n[1], g.n[2]};
    DecomposeResult out;
    out.op.dims = dims;

    if (kind == OperatorKind::kinetic_A) {
        const Piecewise1D& phi = sys.basis.factor;
        Piecewise1D dphi = pw_derivative(phi);
        int p = sys.basis.degree;
        std::vector<double> Mv(2 * p + 1), Kv(2 * p + 1);
        for (int d = -p; d <= p; ++d) {
            Mv[d + p] = pw_multiply(phi, phi.translated(d)).mass();
            Kv[d + p] = pw_multiply(dphi, dphi.translated(d)).mass();
        }
        std::array<std::vector<double>, 3> M1, K1;
        for (int ax = 0; ax < 3; ++ax) {
            M1[ax] = circulant_band_1d(dims[ax], p, Mv);
            K1[ax] = circulant_band_1d(dims[ax], p, Kv);
        }
        for (int ax = 0; ax < 3; ++ax) {
            TensorOperator::Term t;
            t.coeff = 0.5;
            for (int bx = 0; bx < 3; ++bx) t.M[bx] = bx == ax ? K1[bx] : M1[bx];
            out.op.terms.push_back(std::move(t));
        }
        return out;  // exact by construction
    }

    if (kind == OperatorKind::coulomb_T) {
        CanonicalTensor gen = CanonicalTensor::from_dense(dims, sys.pair_circulant().generator);
        CompressResult c = compress(gen, tol, R_max);
        out.rel_error = c.rel_error;
        out.achieved = c.achieved;
        for (int r = 0; r < c.tensor.rank(); ++r) {
            TensorOperator::Term t;
            t.coeff = c.tensor.weights[r];
            for (int ax = 0; ax < 3; ++ax) {
                int n = dims[ax];
                const double* col = c.tensor.factors[ax].data() + static_cast<long>(r) * n;
                t.M[ax].assign(static_cast<long>(n) * n, 0.0);
                // 1-D circulant with the factor column as generator
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < n; ++j)
                        t.M[ax][static_cast<long>(i) * n + j] = col[wrap1(i - j, n)];
            }
            out.op.terms.push_back(std::move(t));
        }
        return out;
    }

    // nuclear_B: per band delta, B_delta x[a] = b_delta(a) x[a + delta]
    long N = g.size();
    double resid2 = 0.0, total2 = 0.0;
    for (const auto& [off, vals] : sys.W.w) {
        std::vector<double> profile(N, 0.0);
        for (long a = 0; a < N; ++a) {
            auto ia = g.unflatten(a);
            for (const Nucleus& nuc : sys.nuclei.entries)
                profile[a] += nuc.charge * vals[g.wrap(ia[0] - nuc.cell[0], ia[1] - nuc.cell[1],
                                                       ia[2] - nuc.cell[2])];
        }
        CanonicalTensor prof = CanonicalTensor::from_dense(dims, profile);
        double pn = tensor_norm(prof);
        total2 += pn * pn;
        if (pn == 0.0) continue;
        CompressResult c = compress(prof, tol, R_max);
        resid2 += (c.rel_error * pn) * (c.rel_error * pn);
        out.achieved = out.achieved && c.achieved;
        for (int r = 0; r < c.tensor.rank(); ++r) {
            TensorOperator::Term t;
            t.coeff = c.tensor.weights[r];
            for (int ax = 0; ax < 3; ++ax) {
                int n = dims[ax];
                const double* col = c.tensor.factors[ax].data() + static_cast<long>(r) * n;
                t.M[ax].assign(static_cast<long>(n) * n, 0.0);
                // diag(col) times the shift by off.d[ax]
                for (int i = 0; i < n; ++i)
                    t.M[ax][static_cast<long>(i) * n + wrap1(i + off.d[ax], n)] = col[i];
            }
            out.op.terms.push_back(std::move(t));
        }
    }
    out.rel_error = total2 > 0.0 ? std::sqrt(resid2 / total2) : 0.0;
    return out;
}

namespace {

template <typename T>
void put(std::ofstream& f, const T& v) {
    f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
bool get(std::ifstream& f, T& v) {
    f.read(reinterpret_cast<char*>(&v), sizeof(T));
    return static_cast<bool>(f);
}

} // namespace

bool save_tensor_checkpoint(const std::string& path,
                            const std::vector<CanonicalTensor>& orbitals) {
    std::ofstream f(path, std::ios::binary);
    if (!f) return false;
    f.write("HFCT", 4);
    put(f, static_cast<std::uint32_t>(1));
    std::array<int, 3> dims = orbitals.empty() ? std::array<int, 3>{0, 0, 0} : orbitals[0].dims;
    for (int ax = 0; ax < 3; ++ax) put(f, static_cast<std::uint32_t>(dims[ax]));
    put(f, static_cast<std::uint32_t>(orbitals.size()));
    for (const CanonicalTensor& t : orbitals) {
        if (t.dims != dims) return false;
        put(f, static_cast<std::uint32_t>(t.rank()));
        f.write(reinterpret_cast<const char*>(t.weights.data()),
                static_cast<std::streamsize>(t.weights.size() * sizeof(double)));
        for (int ax = 0; ax < 3; ++ax)
            f.write(reinterpret_cast<const char*>(t.factors[ax].data()),
                    static_cast<std::streamsize>(t.factors[ax].size() * sizeof(double)));
    }
    return static_cast<bool>(f);
}

bool load_tensor_checkpoint(const std::string& path, std::vector<CanonicalTensor>& orbitals) {
    std::ifstream f(path, std::ios::binary);
    if (!f) return false;
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, "HFCT", 4) != 0) return false;
    std::uint32_t version;
    if (!get(f, version) || version != 1) return false;
    std::array<int, 3> dims;
    for (int ax = 0; ax < 3; ++ax) {
        std::uint32_t d;
        if (!get(f, d)) return false;
        dims[ax] = static_cast<int>(d);
    }
    std::uint32_t count;
    if (!get(f, count)) return false;
    orbitals.clear();
    for (std::uint32_t i = 0; i < count; ++i) {
        CanonicalTensor t;
        t.dims = dims;
        std::uint32_t R;
        if (!get(f, R)) return false;
        t.weights.resize(R);
        f.read(reinterpret_cast<char*>(t.weights.data()),
               static_cast<std::streamsize>(R * sizeof(double)));
        for (int ax = 0; ax < 3; ++ax) {
            t.factors[ax].resize(static_cast<long>(R) * dims[ax]);
            f.read(reinterpret_cast<char*>(t.factors[ax].data()),
                   static_cast<std::streamsize>(t.factors[ax].size() * sizeof(double)));
        }
        if (!f) return false;
        orbitals.push_back(std::move(t));
    }
    return true;
}

namespace {

double vdot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

} // namespace

ScfResult scf_solve_tensor(const HFSystem& sys, const ScfOptions& opt, double tensor_tol,
                           int R_max, std::vector<int>* ranks) {
    if (opt.mode != VeeMode::exact && opt.mode != VeeMode::rank1)
        throw ParseError("SCF supports the exact and rank1 repulsion modes");
    const GridSpec& g = sys.grid;
    long N = g.size();
    std::array<int, 3> dims = {g.n[0], g.n[1], g.n[2]};

    ScfResult res;
    ScfState& state = res.state;

    auto solve_set = [&](const LinearOp& op, const Preconditioner& P, const OrbitalSet& start,
                         int outer) {
        OrbitalSet out;
        std::vector<std::vector<double>> locked;
        std::mt19937 rng(2026);
        std::normal_distribution<double> nd;
        double max_res = 0.0;
        for (int i = 0; i < opt.m; ++i) {
            std::vector<double> psi0;
            if (i < static_cast<int>(start.c.size()))
                psi0 = start.c[i];
            else {
                psi0.resize(N);
                for (double& v : psi0) v = nd(rng);
            }
            DavidsonResult d = davidson(op, P, std::move(psi0), opt.inner_tol, opt.maxspace, locked);
            if (opt.log)
                for (const DavidsonLogEntry& e : d.log)
                    *opt.log << outer << '\t' << e.iter << '\t' << e.nu << '\t' << e.rnorm << '\t'
                             << e.wall << '\n';
            state.total_inner += d.iterations;
            max_res = std::max(max_res, d.residual);
            out.eps.push_back(d.nu);
            out.c.push_back(std::move(d.psi));
            locked.push_back(out.c.back());
        }
        state.max_residual = max_res;
        return out;
    };

    // orbitals pass through the canonical representation between outer steps
    std::vector<int> last_ranks;
    auto to_tensor_and_back = [&](OrbitalSet& orb) {
        last_ranks.clear();
        for (auto& c : orb.c) {
            CompressResult cr = compress(CanonicalTensor::from_dense(dims, c), tensor_tol, R_max);
            last_ranks.push_back(cr.tensor.rank());
            c = cr.tensor.densify();
        }
        // compression perturbs orthonormality; restore it
        for (size_t i = 0; i < orb.c.size(); ++i) {
            for (size_t j = 0; j < i; ++j) {
                double d = vdot(orb.c[j], orb.c[i]);
                for (long a = 0; a < N; ++a) orb.c[i][a] -= d * orb.c[j][a];
            }
            double nn = std::sqrt(vdot(orb.c[i], orb.c[i]));
            for (double& v : orb.c[i]) v /= nn;
        }
    };

    FockOperator core = make_core_operator(sys);
    Preconditioner P0 = build_preconditioner(opt.prec, sys, {}, opt.m);
    res.orbitals = solve_set([&core](const std::vector<double>& x) { return core.apply(x); }, P0,
                             OrbitalSet{}, 0);
    to_tensor_and_back(res.orbitals);
    state.energy_history.push_back(total_energy(sys, res.orbitals, opt.mode).E_total);

    double prev_E = state.energy_history.back();
    for (int k = 0; k < opt.max_outer; ++k) {
        FockOperator F = make_fock_operator(sys, res.orbitals, opt.mode);
        std::vector<double> z(N, 0.0);
        for (const auto& c : res.orbitals.c)
            for (long a = 0; a < N; ++a) z[a] += c[a] * c[a];
        Preconditioner P = build_preconditioner(opt.prec, sys, z, opt.m);
        OrbitalSet next = solve_set([&F](const std::vector<double>& x) { return F.apply(x); }, P,
                                    res.orbitals, state.iterations + 1);
        to_tensor_and_back(next);
        res.orbitals = std::move(next);
        double E = total_energy(sys, res.orbitals, opt.mode).E_total;
        ++state.iterations;
        state.main_inner = state.total_inner;
        state.energy_history.push_back(E);
        state.energy_delta = std::abs(E - prev_E);
        if (state.energy_delta < opt.outer_tol && state.max_residual < opt.inner_tol) {
            state.converged = true;
            break;
        }
        prev_E = E;
    }
    if (ranks) *ranks = last_ranks;
    res.energy = total_energy(sys, res.orbitals, opt.mode);
    return res;
}

} // namespace gridhf
