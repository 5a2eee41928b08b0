#include <cmath>
#include <cstdio>
#include <random>

#include "doctest.h"
#include "gridhf/errors.hpp"
#include "gridhf/tensor.hpp"

using namespace gridhf;

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double dist(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

std::vector<double> random_dense(long n, std::mt19937& rng) {
    std::normal_distribution<double> nd;
    std::vector<double> v(n);
    for (double& x : v) x = nd(rng);
    return v;
}

CanonicalTensor random_cp_tensor(const std::array<int, 3>& dims, int R, std::mt19937& rng) {
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

// dense matvec for a row-major N x N matrix
std::vector<double> mat_apply(const std::vector<double>& M, const std::vector<double>& x) {
    long N = static_cast<long>(x.size());
    std::vector<double> y(N, 0.0);
    for (long i = 0; i < N; ++i)
        for (long j = 0; j < N; ++j) y[i] += M[i * N + j] * x[j];
    return y;
}

HFSystem& tensor_p0_system() {
    static HFSystem sys = [] {
        GridSpec g = build_uniform_grid(4, 4, 4, 0.9, 0, Boundary::periodic);
        NucleusList nuc;
        nuc.entries = {{2.0, {0, 0, 0}}, {1.0, {2, 1, 3}}};
        return assemble_system(g, BasisFamily::make(0), nuc, 1e-8);
    }();
    return sys;
}

HFSystem& tensor_p1_system() {
    static HFSystem sys = [] {
        GridSpec g = build_uniform_grid(3, 3, 3, 1.1, 1, Boundary::periodic);
        NucleusList nuc;
        nuc.entries = {{2.0, {0, 0, 0}}};
        return assemble_system(g, BasisFamily::make(1), nuc, 1e-7);
    }();
    return sys;
}

} // namespace

TEST_CASE("canonical form: from_dense is exact and normalized") {
    std::mt19937 rng(11);
    std::array<int, 3> dims = {3, 4, 5};
    std::vector<double> x = random_dense(60, rng);
    CanonicalTensor t = CanonicalTensor::from_dense(dims, x);
    CHECK(t.rank() <= 12);
    std::vector<double> back = t.densify();
    for (long i = 0; i < 60; ++i) CHECK(back[i] == doctest::Approx(x[i]).epsilon(1e-13));
    // invariants: unit factor columns, nonincreasing nonnegative weights
    for (int r = 0; r < t.rank(); ++r) {
        CHECK(t.weights[r] >= 0.0);
        if (r > 0) CHECK(t.weights[r] <= t.weights[r - 1] + 1e-14);
        for (int ax = 0; ax < 3; ++ax) {
            double nrm = 0.0;
            for (int i = 0; i < dims[ax]; ++i) {
                double v = t.factors[ax][static_cast<long>(r) * dims[ax] + i];
                nrm += v * v;
            }
            CHECK(std::sqrt(nrm) == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
    CHECK_THROWS_AS(CanonicalTensor::from_dense(dims, std::vector<double>(59)), DimensionError);
}

TEST_CASE("tensor_dot and tensor_norm agree with dense inner products") {
    std::mt19937 rng(12);
    std::array<int, 3> dims = {4, 3, 4};
    CanonicalTensor a = random_cp_tensor(dims, 3, rng);
    CanonicalTensor b = random_cp_tensor(dims, 5, rng);
    std::vector<double> da = a.densify(), db = b.densify();
    CHECK(tensor_dot(a, b) == doctest::Approx(dot(da, db)).epsilon(1e-12));
    CHECK(tensor_norm(a) == doctest::Approx(std::sqrt(dot(da, da))).epsilon(1e-12));
    CanonicalTensor c = random_cp_tensor({4, 3, 5}, 2, rng);
    CHECK_THROWS_AS(tensor_dot(a, c), DimensionError);
}

TEST_CASE("tensor operator: periodic Laplacian Kronecker sum vs dense") {
    int n = 8;
    std::vector<double> L(static_cast<long>(n) * n, 0.0), I(static_cast<long>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) {
        I[static_cast<long>(i) * n + i] = 1.0;
        L[static_cast<long>(i) * n + i] = 2.0;
        L[static_cast<long>(i) * n + (i + 1) % n] = -1.0;
        L[static_cast<long>(i) * n + (i + n - 1) % n] = -1.0;
    }
    TensorOperator op;
    op.dims = {n, n, n};
    for (int ax = 0; ax < 3; ++ax) {
        TensorOperator::Term t;
        for (int bx = 0; bx < 3; ++bx) t.M[bx] = bx == ax ? L : I;
        op.terms.push_back(std::move(t));
    }
    long N = static_cast<long>(n) * n * n;
    std::vector<double> D = op.densify();
    // oracle: act on a random dense vector with the 3-D stencil directly
    std::mt19937 rng(13);
    std::vector<double> x = random_dense(N, rng);
    std::vector<double> want(N, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
                long a = (static_cast<long>(i) * n + j) * n + k;
                want[a] = 6.0 * x[a] -
                          x[(static_cast<long>((i + 1) % n) * n + j) * n + k] -
                          x[(static_cast<long>((i + n - 1) % n) * n + j) * n + k] -
                          x[(static_cast<long>(i) * n + (j + 1) % n) * n + k] -
                          x[(static_cast<long>(i) * n + (j + n - 1) % n) * n + k] -
                          x[(static_cast<long>(i) * n + j) * n + (k + 1) % n] -
                          x[(static_cast<long>(i) * n + j) * n + (k + n - 1) % n];
            }
    std::vector<double> got = mat_apply(D, x);
    for (long a = 0; a < N; ++a) CHECK(got[a] == doctest::Approx(want[a]).epsilon(1e-12));

    // tensor-format matvec matches and keeps exact rank bookkeeping
    CanonicalTensor cx = CanonicalTensor::from_dense(op.dims, x);
    CanonicalTensor cy = tensor_matvec(op, cx);
    CHECK(cy.rank() == op.rank() * cx.rank());
    std::vector<double> dy = cy.densify();
    for (long a = 0; a < N; ++a) CHECK(dy[a] == doctest::Approx(want[a]).epsilon(1e-11));
    CHECK_THROWS_AS(tensor_matvec(op, random_cp_tensor({4, 4, 4}, 1, std::ref(rng))),
                    DimensionError);
}

TEST_CASE("compress removes duplicated and linearly dependent terms") {
    std::mt19937 rng(14);
    std::array<int, 3> dims = {5, 4, 6};
    CanonicalTensor base = random_cp_tensor(dims, 2, rng);

    // five copies of each term at a fifth of the weight: rank 10 presentation
    CanonicalTensor fat;
    fat.dims = dims;
    for (int copy = 0; copy < 5; ++copy)
        for (int r = 0; r < 2; ++r) {
            fat.weights.push_back(base.weights[r] / 5.0);
            for (int ax = 0; ax < 3; ++ax)
                fat.factors[ax].insert(fat.factors[ax].end(),
                                       base.factors[ax].begin() + r * dims[ax],
                                       base.factors[ax].begin() + (r + 1) * dims[ax]);
        }
    fat.normalize();
    CHECK(fat.rank() == 10);
    CHECK(dist(fat.densify(), base.densify()) < 1e-12);

    CompressResult c = compress(fat, 1e-10, 4);
    CHECK(c.achieved);
    CHECK(c.tensor.rank() <= 2);
    CHECK(dist(c.tensor.densify(), base.densify()) < 1e-9 * tensor_norm(base));

    // rank-3 tensor presented through 9 split columns
    CanonicalTensor base3 = random_cp_tensor(dims, 3, rng);
    CanonicalTensor fat3;
    fat3.dims = dims;
    for (int copy = 0; copy < 3; ++copy)
        for (int r = 0; r < 3; ++r) {
            fat3.weights.push_back(base3.weights[r] / 3.0);
            for (int ax = 0; ax < 3; ++ax)
                fat3.factors[ax].insert(fat3.factors[ax].end(),
                                        base3.factors[ax].begin() + r * dims[ax],
                                        base3.factors[ax].begin() + (r + 1) * dims[ax]);
        }
    fat3.normalize();
    CompressResult c3 = compress(fat3, 1e-10, 5);
    CHECK(c3.achieved);
    CHECK(c3.tensor.rank() <= 3);
    CHECK(c3.rel_error < 1e-10);
}

TEST_CASE("compress: zero input and unconstrained tolerance") {
    CanonicalTensor z = CanonicalTensor::zero({3, 3, 3});
    CompressResult cz = compress(z, 1e-8, 4);
    CHECK(cz.achieved);
    CHECK(cz.tensor.rank() == 0);
    CHECK(cz.rel_error == 0.0);

    // tol = inf keeps only the dominant rank-1 component; compare against an
    // independent dense alternating power iteration
    std::mt19937 rng(15);
    std::array<int, 3> dims = {6, 5, 4};
    std::vector<double> x = random_dense(dims[0] * dims[1] * dims[2], rng);
    CanonicalTensor cx = CanonicalTensor::from_dense(dims, x);
    CompressResult c1 = compress(cx, std::numeric_limits<double>::infinity(), 6);
    CHECK(c1.achieved);
    CHECK(c1.tensor.rank() == 1);

    std::vector<double> u(dims[0], 1.0), v(dims[1], 1.0), t(dims[2], 1.0);
    double sigma = 0.0;
    auto at = [&](int i, int j, int k) { return x[(static_cast<long>(i) * dims[1] + j) * dims[2] + k]; };
    for (int it = 0; it < 400; ++it) {
        for (int i = 0; i < dims[0]; ++i) {
            double s = 0.0;
            for (int j = 0; j < dims[1]; ++j)
                for (int k = 0; k < dims[2]; ++k) s += at(i, j, k) * v[j] * t[k];
            u[i] = s;
        }
        double nu = std::sqrt(dot(u, u));
        for (double& w : u) w /= nu;
        for (int j = 0; j < dims[1]; ++j) {
            double s = 0.0;
            for (int i = 0; i < dims[0]; ++i)
                for (int k = 0; k < dims[2]; ++k) s += at(i, j, k) * u[i] * t[k];
            v[j] = s;
        }
        double nv = std::sqrt(dot(v, v));
        for (double& w : v) w /= nv;
        for (int k = 0; k < dims[2]; ++k) {
            double s = 0.0;
            for (int i = 0; i < dims[0]; ++i)
                for (int j = 0; j < dims[1]; ++j) s += at(i, j, k) * u[i] * v[j];
            t[k] = s;
        }
        sigma = std::sqrt(dot(t, t));
        for (double& w : t) w /= sigma;
    }
    double xnorm = std::sqrt(dot(x, x));
    double oracle_err = std::sqrt(std::max(0.0, xnorm * xnorm - sigma * sigma)) / xnorm;
    CHECK(c1.rel_error <= oracle_err + 1e-8);
    // stationarity identity of a converged rank-1 fit: err^2 = ||x||^2 - ||y||^2
    double yn = tensor_norm(c1.tensor);
    CHECK(c1.rel_error ==
          doctest::Approx(std::sqrt(std::max(0.0, xnorm * xnorm - yn * yn)) / xnorm)
              .epsilon(1e-6));
}

TEST_CASE("kinetic decomposition: exact three-term Kronecker sum") {
    const HFSystem& sys = tensor_p1_system();
    DecomposeResult d = decompose_operator(OperatorKind::kinetic_A, sys, 0.0);
    CHECK(d.op.rank() == 3);
    CHECK(d.achieved);
    CHECK(d.rel_error == 0.0);
    long N = sys.grid.size();
    std::vector<double> D = d.op.densify();
    for (long j = 0; j < N; ++j) {
        std::vector<double> e(N, 0.0);
        e[j] = 1.0;
        std::vector<double> want = sys.apply_A(e);
        for (long i = 0; i < N; ++i)
            CHECK(D[i * N + j] == doctest::Approx(want[i]).epsilon(1e-12));
    }
}

TEST_CASE("repulsion circulant decomposition converges with rank") {
    const HFSystem& sys = tensor_p0_system();
    long N = sys.grid.size();
    std::mt19937 rng(16);
    std::vector<double> x = random_dense(N, rng);
    std::vector<double> want = sys.pair_circulant().matvec(x);
    double wn = std::sqrt(dot(want, want));

    double prev = 2.0;
    for (int R : {1, 3, 6}) {
        DecomposeResult d = decompose_operator(OperatorKind::coulomb_T, sys, 1e-12, R);
        CHECK(d.rel_error <= prev + 1e-12);
        prev = d.rel_error;
        std::vector<double> got = mat_apply(d.op.densify(), x);
        // generator error transfers to the operator action (Parseval)
        CHECK(dist(got, want) <= (d.rel_error + 1e-10) * std::sqrt(static_cast<double>(N)) * wn);
    }
    DecomposeResult tight = decompose_operator(OperatorKind::coulomb_T, sys, 1e-4, 8);
    CHECK(tight.rel_error <= 1e-4);
    CHECK(tight.achieved);
}

TEST_CASE("attraction decomposition reproduces the band operator") {
    for (const HFSystem* sp : {&tensor_p0_system(), &tensor_p1_system()}) {
        const HFSystem& sys = *sp;
        // full-rank budget: a dense slice expansion needs n[0] * n[1] terms
        int full = sys.grid.n[0] * sys.grid.n[1];
        DecomposeResult d = decompose_operator(OperatorKind::nuclear_B, sys, 1e-10, full);
        CHECK(d.achieved);
        long N = sys.grid.size();
        std::mt19937 rng(17);
        std::vector<double> x = random_dense(N, rng);
        std::vector<double> want = sys.apply_Bv(x);
        std::vector<double> got = mat_apply(d.op.densify(), x);
        CHECK(dist(got, want) < 1e-6 * std::sqrt(dot(want, want)));
    }
}

TEST_CASE("tensor checkpoint roundtrip") {
    std::mt19937 rng(18);
    std::vector<CanonicalTensor> orig = {random_cp_tensor({4, 3, 5}, 3, rng),
                                         random_cp_tensor({4, 3, 5}, 1, rng)};
    std::string path = "tensor_ckpt_test.hfct";
    REQUIRE(save_tensor_checkpoint(path, orig));
    std::vector<CanonicalTensor> back;
    REQUIRE(load_tensor_checkpoint(path, back));
    REQUIRE(back.size() == orig.size());
    for (size_t i = 0; i < orig.size(); ++i) {
        CHECK(back[i].dims == orig[i].dims);
        REQUIRE(back[i].rank() == orig[i].rank());
        for (int r = 0; r < orig[i].rank(); ++r)
            CHECK(back[i].weights[r] == orig[i].weights[r]);
        for (int ax = 0; ax < 3; ++ax)
            CHECK(back[i].factors[ax] == orig[i].factors[ax]);
    }
    std::remove(path.c_str());
    CHECK_FALSE(load_tensor_checkpoint("no_such_file.hfct", back));
}

TEST_CASE("tensor-format SCF reproduces the dense fixed point") {
    ScfOptions opt;
    opt.m = 1;
    opt.inner_tol = 1e-9;
    opt.outer_tol = 1e-9;
    opt.max_outer = 60;

    // degree 0: converged orbitals are coordinate vectors, exactly rank 1
    {
        const HFSystem& sys = tensor_p0_system();
        ScfResult dense = scf_solve(sys, opt);
        REQUIRE(dense.state.converged);
        std::vector<int> ranks;
        ScfResult tens = scf_solve_tensor(sys, opt, 1e-9, 2, &ranks);
        CHECK(tens.state.converged);
        REQUIRE(ranks.size() == 1);
        CHECK(ranks[0] == 1);
        CHECK(tens.energy.E_total == doctest::Approx(dense.energy.E_total).epsilon(1e-8));
    }

    // degree 1: a full-rank budget must reproduce the dense energy
    {
        const HFSystem& sys = tensor_p1_system();
        ScfResult dense = scf_solve(sys, opt);
        REQUIRE(dense.state.converged);
        std::vector<int> ranks;
        ScfResult tens = scf_solve_tensor(sys, opt, 1e-9, 9, &ranks);
        CHECK(tens.state.converged);
        REQUIRE(ranks.size() == 1);
        CHECK(ranks[0] <= 9);
        CHECK(tens.energy.E_total == doctest::Approx(dense.energy.E_total).epsilon(1e-6));
    }
}
