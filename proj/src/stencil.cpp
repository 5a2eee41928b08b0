#include "gridhf/stencil.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <set>
#include <sstream>
#include <thread>

#include "gridhf/errors.hpp"

namespace gridhf {

int Offset3::linf() const {
    return std::max({std::abs(d[0]), std::abs(d[1]), std::abs(d[2])});
}

bool StencilTable::symmetric(double tol) const {
    for (const auto& [off, v] : entries) {
        if (std::abs(value(-off) - v) > tol) return false;
    }
    return true;
}

long NuclearTable::nnz(double drop_tol) const {
    long n = 0;
    for (const auto& [off, vals] : w)
        for (double v : vals)
            if (std::abs(v) > drop_tol) ++n;
    return n;
}

double FourCenterTable::value(const Offset3& delta, long sep_index, const Offset3& delta2) const {
    auto it = t.find({delta, delta2});
    if (it == t.end()) return 0.0;
    return it->second[sep_index];
}

bool FourCenterTable::stored_zero(const Offset3& delta, const Offset3& delta2) const {
    return t.find({delta, delta2}) == t.end();
}

namespace {

Piecewise1D derivative_of(const Piecewise1D& f) {
    Piecewise1D d;
    d.breaks = f.breaks;
    for (const Poly& p : f.pieces) d.pieces.push_back(p.derivative());
    return d;
}

SeparableFactor pair_factor(const BasisFamily& basis, const Offset3& delta) {
    SeparableFactor s;
    for (int ax = 0; ax < 3; ++ax)
        s.f[ax] = pw_multiply(basis.factor, basis.factor.translated(delta.d[ax]));
    return s;
}

void parallel_for(long n, const std::function<void(long)>& body) {
    unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    unsigned workers = std::min<unsigned>(hw, 8);
    if (n < 16 || workers == 1) {
        for (long i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<long> next(0);
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < workers; ++t)
        pool.emplace_back([&] {
            for (;;) {
                long i = next.fetch_add(1);
                if (i >= n) return;
                body(i);
            }
        });
    for (auto& th : pool) th.join();
}

void prewarm_gauss_rules() {
    std::vector<double> x, w;
    for (int q : {6, 8, 12, 14}) gauss_legendre_01(q, x, w);
}

} // namespace

std::pair<StencilTable, StencilTable> build_stencils(const GridSpec& grid,
                                                     const BasisFamily& basis) {
    (void)grid;
    int p = basis.degree;  // half-width equals the polynomial degree for k <= 1
    const Piecewise1D& phi = basis.factor;
    Piecewise1D dphi = derivative_of(phi);
    std::vector<double> M(2 * p + 1), K(2 * p + 1);
    for (int d = -p; d <= p; ++d) {
        M[d + p] = pw_multiply(phi, phi.translated(d)).mass();
        K[d + p] = pw_multiply(dphi, dphi.translated(d)).mass();
    }
    StencilTable S, A;
    S.kind = StencilKind::overlap;
    A.kind = StencilKind::kinetic;
    S.p = A.p = p;
    for (int di = -p; di <= p; ++di)
        for (int dj = -p; dj <= p; ++dj)
            for (int dk = -p; dk <= p; ++dk) {
                Offset3 off{{di, dj, dk}};
                double s = M[di + p] * M[dj + p] * M[dk + p];
                // symmetric weak form with the -1/2 Laplacian factor
                double a = 0.5 * (K[di + p] * M[dj + p] * M[dk + p] +
                                  M[di + p] * K[dj + p] * M[dk + p] +
                                  M[di + p] * M[dj + p] * K[dk + p]);
                if (s != 0.0) S.entries[off] = s;
                if (a != 0.0) A.entries[off] = a;
            }
    return {S, A};
}

NuclearTable build_nuclear_W(const GridSpec& grid, const BasisFamily& basis, double eta,
                             double drop_tol) {
    NuclearTable W;
    W.dims = {grid.n[0], grid.n[1], grid.n[2]};
    W.p = basis.degree;
    long N = grid.size();
    CalibrationTable calib = calibrate_engine(pair_factor(basis, Offset3{}), eta);
    prewarm_gauss_rules();
    int p = W.p;
    for (int di = -p; di <= p; ++di)
        for (int dj = -p; dj <= p; ++dj)
            for (int dk = -p; dk <= p; ++dk) {
                Offset3 delta{{di, dj, dk}};
                if (-delta < delta) continue;  // filled from the mirror below
                SeparableFactor s = pair_factor(basis, delta);
                if (s.empty()) continue;
                MomentTable mom = compute_moments(s);
                std::vector<double>& vals = W.w[delta];
                vals.assign(N, 0.0);
                parallel_for(N, [&](long a) {
                    auto idx = grid.unflatten(a);
                    std::array<double, 3> R;
                    for (int ax = 0; ax < 3; ++ax) R[ax] = -grid.min_image(idx[ax], ax);
                    double v = engine_integral(s, mom, R, eta, calib);
                    vals[a] = (std::abs(v) <= drop_tol) ? 0.0 : v;
                });
            }
    // mirror: W(pos, delta) = W(pos + delta, -delta), valid only where the
    // minimum-image convention commutes with the shift; recompute the rest
    for (int di = -p; di <= p; ++di)
        for (int dj = -p; dj <= p; ++dj)
            for (int dk = -p; dk <= p; ++dk) {
                Offset3 delta{{di, dj, dk}};
                if (!(-delta < delta)) continue;
                const std::vector<double>& src = W.w.at(-delta);
                SeparableFactor s = pair_factor(basis, delta);
                MomentTable mom = compute_moments(s);
                std::vector<double>& vals = W.w[delta];
                vals.assign(N, 0.0);
                parallel_for(N, [&](long a) {
                    auto idx = grid.unflatten(a);
                    bool exact = true;
                    for (int ax = 0; ax < 3; ++ax)
                        if (grid.min_image(idx[ax] + delta.d[ax], ax) !=
                            grid.min_image(idx[ax], ax) + delta.d[ax])
                            exact = false;
                    if (exact) {
                        vals[a] = src[grid.wrap(idx[0] + di, idx[1] + dj, idx[2] + dk)];
                        return;
                    }
                    std::array<double, 3> R;
                    for (int ax = 0; ax < 3; ++ax) R[ax] = -grid.min_image(idx[ax], ax);
                    double v = engine_integral(s, mom, R, eta, calib);
                    vals[a] = (std::abs(v) <= drop_tol) ? 0.0 : v;
                });
            }
    return W;
}

namespace {

struct Triple {
    Offset3 d1, d2;
    std::array<int, 3> sep;  // wrapped separation in [0, n)
    bool operator<(const Triple& o) const {
        if (!(d1 == o.d1)) return d1 < o.d1;
        if (!(d2 == o.d2)) return d2 < o.d2;
        return sep < o.sep;
    }
    bool operator==(const Triple& o) const {
        return d1 == o.d1 && d2 == o.d2 && sep == o.sep;
    }
};

// Symmetry closure of a translation class under pair swap and within-pair
// flips. Each relation holds for the continuous (unwrapped) separation, so an
// edge is taken only where the transformed minimum image equals the transform
// of the minimum image; on small grids the inexact slots stay in their own
// class and get computed directly.
std::vector<Triple> symmetry_orbit(const GridSpec& g, const Triple& t0) {
    std::set<Triple> seen{t0};
    std::vector<Triple> queue{t0};
    auto wrap3 = [&](const std::array<int, 3>& s) {
        return std::array<int, 3>{mod_offset(s[0], 0, g.n[0]), mod_offset(s[1], 0, g.n[1]),
                                  mod_offset(s[2], 0, g.n[2])};
    };
    auto mi3 = [&](const std::array<int, 3>& s) {
        return std::array<int, 3>{g.min_image(s[0], 0), g.min_image(s[1], 1),
                                  g.min_image(s[2], 2)};
    };
    for (size_t qi = 0; qi < queue.size(); ++qi) {
        Triple t = queue[qi];
        std::array<int, 3> r = mi3(t.sep);
        struct Variant {
            Triple tr;
            std::array<int, 3> r_cont;  // continuous shift implied by the relation
        } variants[3];
        // swap the two pairs: t(d1, r, d2) = t(d2, -r, d1)
        variants[0] = {{t.d2, t.d1, wrap3({-t.sep[0], -t.sep[1], -t.sep[2]})},
                       {-r[0], -r[1], -r[2]}};
        // flip within the first pair: = t(-d1, r - d1, d2)
        variants[1] = {{-t.d1, t.d2,
                        wrap3({t.sep[0] - t.d1.d[0], t.sep[1] - t.d1.d[1], t.sep[2] - t.d1.d[2]})},
                       {r[0] - t.d1.d[0], r[1] - t.d1.d[1], r[2] - t.d1.d[2]}};
        // flip within the second pair: = t(d1, r + d2, -d2)
        variants[2] = {{t.d1, -t.d2,
                        wrap3({t.sep[0] + t.d2.d[0], t.sep[1] + t.d2.d[1], t.sep[2] + t.d2.d[2]})},
                       {r[0] + t.d2.d[0], r[1] + t.d2.d[1], r[2] + t.d2.d[2]}};
        for (const Variant& v : variants) {
            if (mi3(v.tr.sep) != v.r_cont) continue;
            if (seen.insert(v.tr).second) queue.push_back(v.tr);
        }
    }
    return queue;
}

} // namespace

FourCenterTable build_four_center_table(const GridSpec& grid, const BasisFamily& basis,
                                        double eta) {
    FourCenterTable T;
    T.dims = {grid.n[0], grid.n[1], grid.n[2]};
    T.p = basis.degree;
    long N = grid.size();
    int p = T.p;
    prewarm_gauss_rules();
    CalibrationTable calib;
    {
        SeparableFactor s0 = pair_factor(basis, Offset3{});
        auto z0 = reduce_double_to_single(s0, s0).first;
        calib = calibrate_engine(z0, eta);
    }
    // enumerate canonical class representatives
    std::vector<Triple> reps;
    std::set<Triple> covered;
    std::vector<Offset3> window;
    for (int di = -p; di <= p; ++di)
        for (int dj = -p; dj <= p; ++dj)
            for (int dk = -p; dk <= p; ++dk) window.push_back(Offset3{{di, dj, dk}});
    for (const Offset3& d1 : window)
        for (const Offset3& d2 : window) {
            T.t[{d1, d2}].assign(N, 0.0);
            for (long a = 0; a < N; ++a) {
                auto idx = grid.unflatten(a);
                Triple tr{d1, d2, {idx[0], idx[1], idx[2]}};
                if (covered.count(tr)) continue;
                for (const Triple& v : symmetry_orbit(grid, tr)) covered.insert(v);
                reps.push_back(tr);
            }
        }
    // compute each representative, then broadcast over its orbit
    std::vector<double> rep_vals(reps.size(), 0.0);
    parallel_for(static_cast<long>(reps.size()), [&](long i) {
        const Triple& tr = reps[i];
        SeparableFactor s1 = pair_factor(basis, tr.d1);
        SeparableFactor s2 = pair_factor(basis, tr.d2);
        auto [z, omega] = reduce_double_to_single(s1, s2);
        (void)omega;
        if (z.empty()) return;
        MomentTable mom = compute_moments(z);
        std::array<double, 3> R;
        for (int ax = 0; ax < 3; ++ax) R[ax] = grid.min_image(tr.sep[ax], ax);
        rep_vals[i] = engine_integral(z, mom, R, eta, calib);
    });
    for (size_t i = 0; i < reps.size(); ++i) {
        for (const Triple& v : symmetry_orbit(grid, reps[i])) {
            auto it = T.t.find({v.d1, v.d2});
            if (it == T.t.end()) continue;
            long a = grid.flatten(v.sep[0], v.sep[1], v.sep[2]);
            it->second[a] = rep_vals[i];
        }
    }
    return T;
}

// ---- persistence ----

namespace {

void put_u32(std::string& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_i32(std::string& out, int32_t v) { put_u32(out, static_cast<uint32_t>(v)); }
void put_f64(std::string& out, double v) {
    uint64_t u;
    std::memcpy(&u, &v, 8);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((u >> (8 * i)) & 0xff));
}

struct Reader {
    const std::string& buf;
    size_t pos = 0;
    uint32_t u32() {
        if (pos + 4 > buf.size()) throw IoError("truncated table file");
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<unsigned char>(buf[pos++])) << (8 * i);
        return v;
    }
    int32_t i32() { return static_cast<int32_t>(u32()); }
    double f64() {
        if (pos + 8 > buf.size()) throw IoError("truncated table file");
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(static_cast<unsigned char>(buf[pos++])) << (8 * i);
        double d;
        std::memcpy(&d, &v, 8);
        return d;
    }
};

void put_stencil(std::string& out, const StencilTable& s) {
    put_u32(out, static_cast<uint32_t>(s.entries.size()));
    for (const auto& [off, v] : s.entries) {
        put_i32(out, off.d[0]);
        put_i32(out, off.d[1]);
        put_i32(out, off.d[2]);
        put_f64(out, v);
    }
}

void get_stencil(Reader& r, StencilTable& s) {
    uint32_t n = r.u32();
    s.entries.clear();
    for (uint32_t i = 0; i < n; ++i) {
        Offset3 off;
        off.d[0] = r.i32();
        off.d[1] = r.i32();
        off.d[2] = r.i32();
        s.entries[off] = r.f64();
    }
}

} // namespace

uint32_t basis_descriptor_hash(const GridSpec& grid, const BasisFamily& basis) {
    uint32_t h = 2166136261u;
    auto mix = [&](uint32_t v) {
        h ^= v;
        h *= 16777619u;
    };
    mix(static_cast<uint32_t>(basis.degree));
    mix(static_cast<uint32_t>(basis.mode));
    mix(static_cast<uint32_t>(grid.p));
    mix(static_cast<uint32_t>(grid.boundary));
    uint64_t hb;
    double hd = grid.h;
    std::memcpy(&hb, &hd, 8);
    mix(static_cast<uint32_t>(hb));
    mix(static_cast<uint32_t>(hb >> 32));
    return h;
}

void save_tables(const std::string& path, const GridSpec& grid, const BasisFamily& basis,
                 const StencilTable& S, const StencilTable& A, const NuclearTable& W,
                 const FourCenterTable& T) {
    std::string out;
    out += "HFIT";
    put_u32(out, 1);  // format version
    for (int ax = 0; ax < 3; ++ax) put_u32(out, static_cast<uint32_t>(grid.n[ax]));
    put_u32(out, static_cast<uint32_t>(basis.degree));
    put_u32(out, basis_descriptor_hash(grid, basis));
    put_stencil(out, S);
    put_stencil(out, A);
    put_u32(out, static_cast<uint32_t>(W.w.size()));
    for (const auto& [off, vals] : W.w) {
        put_i32(out, off.d[0]);
        put_i32(out, off.d[1]);
        put_i32(out, off.d[2]);
        put_u32(out, static_cast<uint32_t>(vals.size()));
        for (double v : vals) put_f64(out, v);
    }
    put_u32(out, static_cast<uint32_t>(T.t.size()));
    for (const auto& [key, vals] : T.t) {
        for (int ax = 0; ax < 3; ++ax) put_i32(out, key.first.d[ax]);
        for (int ax = 0; ax < 3; ++ax) put_i32(out, key.second.d[ax]);
        put_u32(out, static_cast<uint32_t>(vals.size()));
        for (double v : vals) put_f64(out, v);
    }
    FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw IoError("cannot write " + path);
    std::fwrite(out.data(), 1, out.size(), f);
    std::fclose(f);
}

bool load_tables(const std::string& path, const GridSpec& grid, const BasisFamily& basis,
                 StencilTable& S, StencilTable& A, NuclearTable& W, FourCenterTable& T) {
    FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) return false;
    std::string buf;
    char chunk[65536];
    size_t got;
    while ((got = std::fread(chunk, 1, sizeof(chunk), f)) > 0) buf.append(chunk, got);
    std::fclose(f);
    if (buf.size() < 8 || buf.compare(0, 4, "HFIT") != 0) return false;
    Reader r{buf, 4};
    if (r.u32() != 1) return false;
    for (int ax = 0; ax < 3; ++ax)
        if (r.u32() != static_cast<uint32_t>(grid.n[ax])) return false;
    if (r.u32() != static_cast<uint32_t>(basis.degree)) return false;
    if (r.u32() != basis_descriptor_hash(grid, basis)) return false;
    get_stencil(r, S);
    get_stencil(r, A);
    S.kind = StencilKind::overlap;
    A.kind = StencilKind::kinetic;
    S.p = A.p = basis.degree;
    W = NuclearTable{};
    W.dims = {grid.n[0], grid.n[1], grid.n[2]};
    W.p = basis.degree;
    uint32_t nw = r.u32();
    for (uint32_t i = 0; i < nw; ++i) {
        Offset3 off;
        for (int ax = 0; ax < 3; ++ax) off.d[ax] = r.i32();
        uint32_t n = r.u32();
        std::vector<double> vals(n);
        for (uint32_t j = 0; j < n; ++j) vals[j] = r.f64();
        W.w[off] = std::move(vals);
    }
    T = FourCenterTable{};
    T.dims = W.dims;
    T.p = basis.degree;
    uint32_t nt = r.u32();
    for (uint32_t i = 0; i < nt; ++i) {
        Offset3 d1, d2;
        for (int ax = 0; ax < 3; ++ax) d1.d[ax] = r.i32();
        for (int ax = 0; ax < 3; ++ax) d2.d[ax] = r.i32();
        uint32_t n = r.u32();
        std::vector<double> vals(n);
        for (uint32_t j = 0; j < n; ++j) vals[j] = r.f64();
        T.t[{d1, d2}] = std::move(vals);
    }
    return true;
}

std::string export_stencil_text(const StencilTable& s) {
    std::ostringstream os;
    for (const auto& [off, v] : s.entries) {
        char line[96];
        std::snprintf(line, sizeof(line), "%d %d %d %.17g\n", off.d[0], off.d[1], off.d[2], v);
        os << line;
    }
    return os.str();
}

} // namespace gridhf
