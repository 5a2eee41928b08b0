#include "gridhf/grid.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace gridhf {

GridSpec build_uniform_grid(int n_i, int n_j, int n_k, double h, int p, Boundary boundary) {
    if (p != 0 && p != 1) throw UnsupportedBasisError("basis degree must be 0 or 1");
    if (h <= 0.0) throw InvalidGridError("cell size must be positive");
    int min_n = 2 * p + 1;
    for (int n : {n_i, n_j, n_k}) {
        if (n < min_n) {
            std::ostringstream os;
            os << "axis count " << n << " below minimum " << min_n << " for degree " << p;
            throw InvalidGridError(os.str());
        }
    }
    GridSpec g;
    g.n[0] = n_i;
    g.n[1] = n_j;
    g.n[2] = n_k;
    g.h = h;
    g.p = p;
    g.boundary = boundary;
    return g;
}

BasisFamily BasisFamily::make(int degree, BasisMode mode) {
    if (degree != 0 && degree != 1) throw UnsupportedBasisError("basis degree must be 0 or 1");
    BasisFamily b;
    b.degree = degree;
    b.mode = mode;
    b.factor = (degree == 0) ? Piecewise1D::indicator(-0.5, 0.5)
                             : Piecewise1D::hat(0.0, 1.0);
    return b;
}

void NucleusList::validate(const GridSpec& g) const {
    for (const Nucleus& nu : entries) {
        if (nu.charge <= 0.0) throw InvalidGridError("nuclear charge must be positive");
        for (int ax = 0; ax < 3; ++ax)
            if (nu.cell[ax] < 0 || nu.cell[ax] >= g.n[ax])
                throw InvalidGridError("nucleus cell index outside grid");
    }
}

namespace {

// Per-axis breakpoint construction. Every distinct center x_i owns a cell
// [x_i - c_i/2, x_i + c_i/2]; the gap g_i between consecutive centers is tiled
// with k_i equal interior cells, so c_i/2 + k_i d_i + c_{i+1}/2 = g_i. All
// widths must stay in [h/2, 2h]. Gaps shorter than h force adjacent center
// cells (k=0), which rigidly couples c_i and c_{i+1}.
struct AxisLayout {
    std::vector<double> breaks;
    std::vector<int> center_cells;  // cell index of each center, in sorted order
};

AxisLayout layout_axis(const std::vector<double>& xs, double h, int axis) {
    AxisLayout out;
    size_t K = xs.size();
    std::vector<double> c(K, h);  // center-cell widths
    size_t G = K - 1;
    std::vector<int> k(G, 0);
    std::vector<double> g(G);
    for (size_t i = 0; i < G; ++i) {
        g[i] = xs[i + 1] - xs[i];
        k[i] = std::max(0, static_cast<int>(std::lround(g[i] / h)) - 1);
    }
    // Left-to-right propagation of center widths.
    auto fail = [&](size_t i) {
        std::ostringstream os;
        os << "axis " << axis << ": cannot tile the gap of length " << g[i]
           << " between centers " << xs[i] << " and " << xs[i + 1]
           << " with cell widths in [" << h / 2 << ", " << 2 * h << "]";
        throw InfeasibleGridError(os.str());
    };
    // Backward pass: feasible center-width sets. With k interior cells of
    // width d in gap i, c_{i+1} = 2(g_i - k d) - c_i, so given a feasible
    // interval J for c_{i+1}, c_i ranges over 2g_i - hk·[1,4]·... reflected.
    using Ival = std::pair<double, double>;
    auto merge = [](std::vector<Ival> v) {
        std::sort(v.begin(), v.end());
        std::vector<Ival> out;
        for (auto& iv : v) {
            if (iv.second < iv.first) continue;
            if (!out.empty() && iv.first <= out.back().second + 1e-12)
                out.back().second = std::max(out.back().second, iv.second);
            else
                out.push_back(iv);
        }
        return out;
    };
    std::vector<std::vector<Ival>> feas(K);
    feas[K - 1] = {{h / 2, 2.0 * h}};
    for (size_t i = G; i-- > 0;) {
        std::vector<Ival> v;
        int kmax = static_cast<int>(std::floor(2.0 * g[i] / h)) + 1;
        for (const Ival& J : feas[i + 1]) {
            v.push_back({std::max(h / 2, 2.0 * g[i] - J.second),
                         std::min(2.0 * h, 2.0 * g[i] - J.first)});  // k = 0
            if (kmax >= 1)
                v.push_back({std::max(h / 2, 2.0 * g[i] - 4.0 * h * kmax - J.second),
                             std::min(2.0 * h, 2.0 * g[i] - h - J.first)});  // k >= 1 union
        }
        feas[i] = merge(std::move(v));
        if (feas[i].empty()) fail(i);
    }
    auto pick_in = [](const std::vector<Ival>& set, double want) {
        double best = set.front().first;
        double dist = HUGE_VAL;
        for (const Ival& iv : set) {
            double x = std::clamp(want, iv.first, iv.second);
            if (std::abs(x - want) < dist) {
                dist = std::abs(x - want);
                best = x;
            }
        }
        return best;
    };
    c[0] = pick_in(feas[0], (G > 0 && k[0] == 0) ? g[0] : h);
    for (size_t i = 0; i < G; ++i) {
        double want = (i + 1 < G && k[i + 1] == 0) ? std::clamp(g[i + 1], h / 2, 2.0 * h) : h;
        int k_pref = k[i];
        bool done = false;
        int kmax = static_cast<int>(std::floor(2.0 * g[i] / h)) + 1;
        for (int dk = 0; dk <= kmax && !done; ++dk) {
            for (int sgn : {1, -1}) {
                int kk = k_pref + sgn * dk;
                if (kk < 0 || kk > kmax || (dk == 0 && sgn < 0)) continue;
                double lo = std::max(h / 2, 2.0 * g[i] - 4.0 * h * kk - c[i]);
                double hi2 = std::min(2.0 * h, 2.0 * g[i] - (kk == 0 ? 0.0 : h * kk) - c[i]);
                if (kk == 0) {
                    lo = hi2 = 2.0 * g[i] - c[i];
                    if (lo < h / 2 - 1e-12 || lo > 2.0 * h + 1e-12) continue;
                }
                // intersect with the downstream-feasible set
                for (const Ival& J : feas[i + 1]) {
                    double a = std::max(lo, J.first), b = std::min(hi2, J.second);
                    if (b < a - 1e-12) continue;
                    k[i] = kk;
                    c[i + 1] = std::clamp(want, a, b);
                    done = true;
                    break;
                }
                if (done) break;
            }
        }
        if (!done) fail(i);
    }
    // Emit breakpoints.
    out.breaks.push_back(xs[0] - c[0] / 2.0);
    for (size_t i = 0; i < K; ++i) {
        out.center_cells.push_back(static_cast<int>(out.breaks.size()) - 1);
        out.breaks.push_back(xs[i] + c[i] / 2.0);
        if (i < G) {
            double L = g[i] - 0.5 * (c[i] + c[i + 1]);
            for (int t = 1; t < k[i]; ++t)
                out.breaks.push_back(xs[i] + c[i] / 2.0 + L * t / k[i]);
            if (k[i] > 0) out.breaks.push_back(xs[i + 1] - c[i + 1] / 2.0);
        }
    }
    return out;
}

} // namespace

NonUniformGrid build_centered_tensor_grid(const std::vector<std::array<double, 3>>& nuclei,
                                          double h_target) {
    if (h_target <= 0.0) throw InvalidGridError("target step must be positive");
    if (nuclei.empty()) throw InvalidGridError("need at least one nucleus");
    NonUniformGrid g;
    g.h_target = h_target;
    for (int ax = 0; ax < 3; ++ax) {
        std::vector<std::pair<double, int>> coords;
        for (size_t s = 0; s < nuclei.size(); ++s) coords.push_back({nuclei[s][ax], (int)s});
        std::sort(coords.begin(), coords.end());
        std::vector<double> xs;
        std::vector<std::vector<int>> owners;
        for (auto& [x, idx] : coords) {
            if (!xs.empty() && std::abs(x - xs.back()) < 1e-12) {
                owners.back().push_back(idx);
            } else if (!xs.empty() && x - xs.back() <= h_target / 2.0) {
                std::ostringstream os;
                os << "nuclei " << owners.back().front() << " and " << idx << " project to axis "
                   << ax << " coordinates " << xs.back() << " and " << x
                   << ", closer than the minimum separation " << h_target / 2.0;
                throw InfeasibleGridError(os.str());
            } else {
                xs.push_back(x);
                owners.push_back({idx});
            }
        }
        AxisLayout lay = layout_axis(xs, h_target, ax);
        for (size_t i = 0; i + 1 < lay.breaks.size(); ++i) {
            double w = lay.breaks[i + 1] - lay.breaks[i];
            if (w < h_target / 2.0 - 1e-9 || w > 2.0 * h_target + 1e-9)
                throw InfeasibleGridError("cell width outside [h/2, 2h]");
        }
        g.breakpoints[ax] = lay.breaks;
        for (size_t i = 0; i < xs.size(); ++i)
            for (int idx : owners[i]) g.anchors[ax][idx] = lay.center_cells[i];
    }
    return g;
}

} // namespace gridhf
