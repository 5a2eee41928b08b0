#include <cmath>
#include <complex>
#include <cstdio>
#include <random>

#include "doctest.h"
#include "gridhf/fft.hpp"
#include "gridhf/stencil.hpp"
#include "oracles.hpp"

using namespace gridhf;

namespace {

SeparableFactor pair_product(const BasisFamily& basis, const Offset3& delta) {
    SeparableFactor s;
    for (int ax = 0; ax < 3; ++ax)
        s.f[ax] = pw_multiply(basis.factor, basis.factor.translated(delta.d[ax]));
    return s;
}

std::vector<cplx> naive_dft(const std::vector<cplx>& a, bool inverse) {
    size_t n = a.size();
    std::vector<cplx> out(n, cplx(0, 0));
    double sign = inverse ? 1.0 : -1.0;
    for (size_t k = 0; k < n; ++k)
        for (size_t j = 0; j < n; ++j) {
            double ang = sign * 2.0 * M_PI * static_cast<double>(k * j) / static_cast<double>(n);
            out[k] += a[j] * cplx(std::cos(ang), std::sin(ang));
        }
    if (inverse)
        for (auto& v : out) v /= static_cast<double>(n);
    return out;
}

} // namespace

TEST_CASE("fft matches the naive DFT and round-trips") {
    std::mt19937 rng(91);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (size_t n : {1ul, 2ul, 8ul, 12ul, 15ul, 27ul, 64ul}) {
        std::vector<cplx> a(n);
        for (auto& v : a) v = cplx(u(rng), u(rng));
        std::vector<cplx> ref = naive_dft(a, false);
        std::vector<cplx> got = a;
        fft(got, false);
        for (size_t k = 0; k < n; ++k) CHECK(std::abs(got[k] - ref[k]) < 1e-11);
        fft(got, true);
        for (size_t k = 0; k < n; ++k) CHECK(std::abs(got[k] - a[k]) < 1e-12);
    }
}

TEST_CASE("fft3 round-trips and diagonalizes a circular shift") {
    std::array<int, 3> dims = {4, 6, 8};
    size_t N = 4 * 6 * 8;
    std::mt19937 rng(17);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<cplx> a(N);
    for (auto& v : a) v = cplx(u(rng), 0.0);
    std::vector<cplx> b = a;
    fft3(dims, b, false);
    std::vector<cplx> c = b;
    fft3(dims, c, true);
    for (size_t i = 0; i < N; ++i) CHECK(std::abs(c[i] - a[i]) < 1e-12);

    // shifting by one along the last axis multiplies mode k by exp(-2 pi i k / n2)
    std::vector<cplx> shifted(N);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 6; ++j)
            for (int k = 0; k < 8; ++k)
                shifted[(i * 6 + j) * 8 + k] = a[(i * 6 + j) * 8 + (k + 7) % 8];
    fft3(dims, shifted, false);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 6; ++j)
            for (int k = 0; k < 8; ++k) {
                double ang = -2.0 * M_PI * k / 8.0;
                cplx expect = b[(i * 6 + j) * 8 + k] * cplx(std::cos(ang), std::sin(ang));
                CHECK(std::abs(shifted[(i * 6 + j) * 8 + k] - expect) < 1e-11);
            }
}

TEST_CASE("overlap and kinetic stencils") {
    GridSpec g = build_uniform_grid(8, 8, 8, 0.5, 0, Boundary::periodic);
    auto [S0, A0] = build_stencils(g, BasisFamily::make(0));
    CHECK(S0.entries.size() == 1);
    CHECK(S0.value({{0, 0, 0}}) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(A0.entries.empty());  // weak Laplacian of cell indicators vanishes

    GridSpec g1 = build_uniform_grid(8, 8, 8, 0.5, 1, Boundary::periodic);
    auto [S1, A1] = build_stencils(g1, BasisFamily::make(1));
    CHECK(S1.entries.size() == 27);
    CHECK(S1.value({{0, 0, 0}}) == doctest::Approx(8.0 / 27.0).epsilon(1e-14));
    CHECK(S1.value({{1, 0, 0}}) == doctest::Approx((1.0 / 6.0) * (2.0 / 3.0) * (2.0 / 3.0)));
    CHECK(S1.value({{1, 1, 1}}) == doctest::Approx(1.0 / 216.0));
    CHECK(S1.symmetric());
    CHECK(A1.symmetric());
    // 1-D pieces: mass 2/3, 1/6; stiffness 2, -1 (with the 1/2 factor applied)
    CHECK(A1.value({{0, 0, 0}}) == doctest::Approx(0.5 * 3.0 * 2.0 * (2.0 / 3.0) * (2.0 / 3.0)));
    double row_sum_A = 0.0, row_sum_S = 0.0;
    for (const auto& [off, v] : A1.entries) row_sum_A += v;
    for (const auto& [off, v] : S1.entries) row_sum_S += v;
    CHECK(row_sum_A == doctest::Approx(0.0).epsilon(0).scale(1).epsilon(1e-13));
    CHECK(row_sum_S == doctest::Approx(1.0).epsilon(1e-13));  // partition of unity
}

TEST_CASE("nuclear attraction table") {
    GridSpec g = build_uniform_grid(4, 4, 4, 1.0, 0, Boundary::periodic);
    BasisFamily basis = BasisFamily::make(0);
    NuclearTable W = build_nuclear_W(g, basis, 1e-8);
    REQUIRE(W.w.size() == 1);
    const auto& vals = W.w.at(Offset3{{0, 0, 0}});
    REQUIRE(static_cast<long>(vals.size()) == g.size());
    SeparableFactor s0 = pair_product(basis, {{0, 0, 0}});
    for (long a : {0l, 1l, 21l, 42l, 63l}) {
        auto idx = g.unflatten(a);
        std::array<double, 3> R;
        for (int ax = 0; ax < 3; ++ax) R[ax] = -g.min_image(idx[ax], ax);
        CHECK(vals[a] == doctest::Approx(oracle::coulomb(s0, R, 1e-10)).epsilon(1e-8));
    }
    CHECK(W.nnz() == 64);
    // drop tolerance zeroes far entries but keeps the array shape
    NuclearTable Wd = build_nuclear_W(g, basis, 1e-8, 1.0);
    CHECK(Wd.nnz() < 64);
    CHECK(Wd.w.at(Offset3{{0, 0, 0}}).size() == 64);
}

TEST_CASE("nuclear table symmetry across band offsets") {
    GridSpec g = build_uniform_grid(4, 4, 4, 1.0, 1, Boundary::periodic);
    BasisFamily basis = BasisFamily::make(1);
    NuclearTable W = build_nuclear_W(g, basis, 1e-7);
    CHECK(W.w.size() == 27);
    std::mt19937 rng(3);
    std::uniform_int_distribution<int> du(-1, 1), dp(0, 3);
    int checked = 0;
    for (int t = 0; t < 80; ++t) {
        Offset3 d{{du(rng), du(rng), du(rng)}};
        int i = dp(rng), j = dp(rng), k = dp(rng);
        // the mirror identity holds where min-image commutes with the shift
        int idx[3] = {i, j, k};
        bool exact = true;
        for (int ax = 0; ax < 3; ++ax)
            if (g.min_image(idx[ax] + d.d[ax], ax) != g.min_image(idx[ax], ax) + d.d[ax])
                exact = false;
        if (!exact) continue;
        ++checked;
        double lhs = W.w.at(d)[g.flatten(i, j, k)];
        double rhs = W.w.at(-d)[g.wrap(i + d.d[0], j + d.d[1], k + d.d[2])];
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    }
    CHECK(checked > 20);
    // spot check one off-diagonal value against the oracle
    Offset3 d{{1, 0, 0}};
    SeparableFactor s = pair_product(basis, d);
    long a = g.flatten(2, 1, 0);
    auto idx = g.unflatten(a);
    std::array<double, 3> R;
    for (int ax = 0; ax < 3; ++ax) R[ax] = -g.min_image(idx[ax], ax);
    CHECK(W.w.at(d)[a] == doctest::Approx(oracle::coulomb(s, R, 1e-9)).epsilon(1e-7));
}

TEST_CASE("four-center table: values, symmetries, sparsity") {
    GridSpec g = build_uniform_grid(4, 4, 4, 1.0, 0, Boundary::periodic);
    BasisFamily basis = BasisFamily::make(0);
    FourCenterTable T = build_four_center_table(g, basis, 1e-8);
    REQUIRE(T.t.size() == 1);
    CHECK(T.stored_zero({{1, 0, 0}}, {{0, 0, 0}}));
    SeparableFactor s0 = pair_product(basis, {{0, 0, 0}});
    auto z = reduce_double_to_single(s0, s0).first;
    for (long a : {0l, 1l, 5l, 22l, 63l}) {
        auto idx = g.unflatten(a);
        std::array<double, 3> R;
        for (int ax = 0; ax < 3; ++ax) R[ax] = g.min_image(idx[ax], ax);
        double ref = oracle::coulomb(z, R, 1e-10);
        CHECK(T.value({{0, 0, 0}}, a, {{0, 0, 0}}) == doctest::Approx(ref).epsilon(1e-8));
    }
    // swap symmetry: t(0, sep, 0) = t(0, -sep, 0)
    for (long a = 0; a < g.size(); ++a) {
        auto idx = g.unflatten(a);
        long b = g.wrap(-idx[0], -idx[1], -idx[2]);
        CHECK(T.value({{0, 0, 0}}, a, {{0, 0, 0}}) ==
              doctest::Approx(T.value({{0, 0, 0}}, b, {{0, 0, 0}})).epsilon(1e-13));
    }
}

TEST_CASE("four-center symmetry classes match direct evaluation at degree 1") {
    GridSpec g = build_uniform_grid(3, 3, 3, 1.0, 1, Boundary::periodic);
    BasisFamily basis = BasisFamily::make(1);
    double eta = 1e-6;
    FourCenterTable T = build_four_center_table(g, basis, eta);
    CHECK(T.t.size() == 729);
    CalibrationTable calib;
    {
        SeparableFactor s0 = pair_product(basis, {{0, 0, 0}});
        calib = calibrate_engine(reduce_double_to_single(s0, s0).first, eta);
    }
    // non-canonical entries must equal an independent direct computation
    std::mt19937 rng(11);
    std::uniform_int_distribution<int> du(-1, 1), dp(0, 2);
    for (int t = 0; t < 12; ++t) {
        Offset3 d1{{du(rng), du(rng), du(rng)}}, d2{{du(rng), du(rng), du(rng)}};
        int i = dp(rng), j = dp(rng), k = dp(rng);
        long a = g.flatten(i, j, k);
        SeparableFactor s1 = pair_product(basis, d1);
        SeparableFactor s2 = pair_product(basis, d2);
        auto z = reduce_double_to_single(s1, s2).first;
        std::array<double, 3> R;
        auto idx = g.unflatten(a);
        for (int ax = 0; ax < 3; ++ax) R[ax] = g.min_image(idx[ax], ax);
        double direct = engine_integral(z, compute_moments(z), R, eta, calib);
        CHECK(T.value(d1, a, d2) == doctest::Approx(direct).epsilon(1e-10));
    }
}

TEST_CASE("table persistence round trip") {
    GridSpec g = build_uniform_grid(4, 4, 4, 1.0, 0, Boundary::periodic);
    BasisFamily basis = BasisFamily::make(0);
    auto [S, A] = build_stencils(g, basis);
    NuclearTable W = build_nuclear_W(g, basis, 1e-8);
    FourCenterTable T = build_four_center_table(g, basis, 1e-8);
    std::string path = "tables_test.hfit";
    save_tables(path, g, basis, S, A, W, T);

    StencilTable S2, A2;
    NuclearTable W2;
    FourCenterTable T2;
    REQUIRE(load_tables(path, g, basis, S2, A2, W2, T2));
    CHECK(S2.entries == S.entries);
    CHECK(A2.entries == A.entries);
    REQUIRE(W2.w.size() == W.w.size());
    CHECK(W2.w.at(Offset3{{0, 0, 0}}) == W.w.at(Offset3{{0, 0, 0}}));
    REQUIRE(T2.t.size() == T.t.size());
    CHECK(T2.t.begin()->second == T.t.begin()->second);

    // mismatched grid or basis must refuse to load
    GridSpec g2 = build_uniform_grid(4, 4, 8, 1.0, 0, Boundary::periodic);
    CHECK_FALSE(load_tables(path, g2, basis, S2, A2, W2, T2));
    CHECK_FALSE(load_tables(path, g, BasisFamily::make(1), S2, A2, W2, T2));
    CHECK_FALSE(load_tables("no_such_file.hfit", g, basis, S2, A2, W2, T2));
    std::remove(path.c_str());

    std::string text = export_stencil_text(S);
    CHECK(text == "0 0 0 1\n");
}
