#include "doctest.h"

#include <cmath>
#include <random>

#include "gridhf/grid.hpp"

using namespace gridhf;

TEST_CASE("mod_offset basics") {
    CHECK(mod_offset(5, 2, 8) == 3);
    CHECK(mod_offset(1, 6, 8) == 3);
    std::mt19937 rng(7);
    for (int t = 0; t < 50; ++t) {
        int n = 1 + (int)(rng() % 40);
        int k = (int)(rng() % 1000) - 500;
        CHECK(mod_offset(k, k, n) == 0);
        int r = mod_offset(k, 3, n);
        CHECK(r >= 0);
        CHECK(r < n);
    }
    CHECK_THROWS_AS(mod_offset(1, 0, 0), InvalidGridError);
}

TEST_CASE("build_uniform_grid validates counts") {
    GridSpec g = build_uniform_grid(8, 8, 8, 1.0, 0, Boundary::periodic);
    CHECK(g.size() == 512);
    CHECK_THROWS_AS(build_uniform_grid(2, 2, 2, 0.5, 1, Boundary::periodic), InvalidGridError);
    GridSpec a = build_uniform_grid(16, 8, 4, 0.7, 1, Boundary::periodic);
    CHECK(a.size() == 512);
}

TEST_CASE("flatten/unflatten round trip and min_image") {
    GridSpec g = build_uniform_grid(4, 6, 5, 1.0, 1, Boundary::periodic);
    for (long idx = 0; idx < g.size(); ++idx) {
        auto [i, j, k] = g.unflatten(idx);
        CHECK(g.flatten(i, j, k) == idx);
    }
    CHECK(g.min_image(3, 0) == -1);   // n=4
    CHECK(g.min_image(2, 0) == -2);
    CHECK(g.min_image(5, 1) == -1);   // n=6
}

TEST_CASE("basis factors: symmetry and translation closure") {
    for (int deg : {0, 1}) {
        BasisFamily b = BasisFamily::make(deg);
        CHECK(b.factor.symmetric_about(0.0));
        std::mt19937 rng(11);
        std::uniform_real_distribution<double> u(-2.0, 2.0);
        for (int t = 0; t < 100; ++t) {
            double x = u(rng);
            double s = u(rng);
            Piecewise1D shifted = b.factor.translated(s);
            CHECK(shifted.eval(x) == doctest::Approx(b.factor.eval(x - s)).epsilon(1e-13));
        }
    }
}

TEST_CASE("hat overlap values") {
    BasisFamily b = BasisFamily::make(1);
    Piecewise1D self = pw_multiply(b.factor, b.factor);
    Piecewise1D adj = pw_multiply(b.factor, b.factor.translated(1.0));
    CHECK(self.mass() == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
    CHECK(adj.mass() == doctest::Approx(1.0 / 6.0).epsilon(1e-14));
}

TEST_CASE("centered tensor grid: basic placements") {
    NonUniformGrid g1 = build_centered_tensor_grid({{{0.0, 0.0, 0.0}}}, 1.0);
    for (int ax = 0; ax < 3; ++ax) {
        REQUIRE(g1.breakpoints[ax].size() == 2);
        CHECK(0.5 * (g1.breakpoints[ax][0] + g1.breakpoints[ax][1]) == doctest::Approx(0.0));
    }

    NonUniformGrid g2 = build_centered_tensor_grid({{{0.0, 0.0, 0.0}, {1.5, 0.0, 0.0}}}, 1.0);
    const auto& bx = g2.breakpoints[0];
    int c0 = g2.anchors[0].at(0), c1 = g2.anchors[0].at(1);
    CHECK(0.5 * (bx[c0] + bx[c0 + 1]) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(0.5 * (bx[c1] + bx[c1 + 1]) == doctest::Approx(1.5).epsilon(1e-12));
    // 2x bound: uniform grid over the span 1.5+padding needs >= ceil(span/h) cells
    CHECK((int)bx.size() - 1 <= 2 * (int)std::ceil((bx.back() - bx.front()) / 1.0));

    CHECK_THROWS_AS(build_centered_tensor_grid({{{0.0, 0.0, 0.0}, {0.3, 0.0, 0.0}}}, 1.0),
                    InfeasibleGridError);
}

TEST_CASE("centered tensor grid: random configurations keep invariants") {
    std::mt19937 rng(23);
    std::uniform_real_distribution<double> pos(-5.0, 5.0);
    int built = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        int nn = 1 + (int)(rng() % 4);
        std::vector<std::array<double, 3>> nuclei;
        for (int s = 0; s < nn; ++s) nuclei.push_back({pos(rng), pos(rng), pos(rng)});
        // enforce the separation precondition per axis (skip infeasible draws)
        bool ok = true;
        for (int ax = 0; ax < 3 && ok; ++ax)
            for (int a = 0; a < nn && ok; ++a)
                for (int b = a + 1; b < nn; ++b) {
                    double d = std::abs(nuclei[a][ax] - nuclei[b][ax]);
                    if (d > 1e-12 && d <= 0.55) { ok = false; break; }
                }
        if (!ok) continue;
        NonUniformGrid g = build_centered_tensor_grid(nuclei, 1.0);
        ++built;
        for (int ax = 0; ax < 3; ++ax) {
            const auto& bk = g.breakpoints[ax];
            for (size_t i = 0; i + 1 < bk.size(); ++i) {
                double w = bk[i + 1] - bk[i];
                CHECK(w >= 0.5 - 1e-9);
                CHECK(w <= 2.0 + 1e-9);
            }
            double span = bk.back() - bk.front();
            CHECK((int)bk.size() - 1 <= 2 * (int)std::ceil(span - 1e-9));
            for (int s = 0; s < nn; ++s) {
                int c = g.anchors[ax].at(s);
                CHECK(std::abs(0.5 * (bk[c] + bk[c + 1]) - nuclei[s][ax]) < 1e-10);
            }
        }
    }
    CHECK(built > 300);
}
