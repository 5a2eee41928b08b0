#include "gridhf/piecewise.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "gridhf/errors.hpp"

namespace gridhf {

namespace {
double binom(int n, int k) {
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}
} // namespace

void Poly::trim() {
    while (!c.empty() && c.back() == 0.0) c.pop_back();
}

double Poly::eval(double x) const {
    double r = 0.0;
    for (size_t i = c.size(); i-- > 0;) r = r * x + c[i];
    return r;
}

Poly Poly::operator+(const Poly& o) const {
    std::vector<double> r(std::max(c.size(), o.c.size()), 0.0);
    for (size_t i = 0; i < c.size(); ++i) r[i] += c[i];
    for (size_t i = 0; i < o.c.size(); ++i) r[i] += o.c[i];
    return Poly(std::move(r));
}

Poly Poly::operator-(const Poly& o) const {
    std::vector<double> r(std::max(c.size(), o.c.size()), 0.0);
    for (size_t i = 0; i < c.size(); ++i) r[i] += c[i];
    for (size_t i = 0; i < o.c.size(); ++i) r[i] -= o.c[i];
    return Poly(std::move(r));
}

Poly Poly::operator*(const Poly& o) const {
    if (c.empty() || o.c.empty()) return Poly();
    std::vector<double> r(c.size() + o.c.size() - 1, 0.0);
    for (size_t i = 0; i < c.size(); ++i)
        for (size_t j = 0; j < o.c.size(); ++j) r[i + j] += c[i] * o.c[j];
    return Poly(std::move(r));
}

Poly Poly::scaled(double s) const {
    std::vector<double> r(c);
    for (double& v : r) v *= s;
    return Poly(std::move(r));
}

Poly Poly::antiderivative() const {
    std::vector<double> r(c.size() + 1, 0.0);
    for (size_t i = 0; i < c.size(); ++i) r[i + 1] = c[i] / static_cast<double>(i + 1);
    return Poly(std::move(r));
}

Poly Poly::derivative() const {
    if (c.size() <= 1) return Poly();
    std::vector<double> r(c.size() - 1);
    for (size_t i = 1; i < c.size(); ++i) r[i - 1] = c[i] * static_cast<double>(i);
    return Poly(std::move(r));
}

Poly Poly::compose_linear(double a, double b) const {
    // p(a + b x) by Horner in the outer variable
    Poly lin({a, b});
    Poly acc;
    for (size_t i = c.size(); i-- > 0;) {
        acc = acc * lin + Poly::constant(c[i]);
    }
    return acc;
}

double Poly::integrate(double lo, double hi) const {
    Poly F = antiderivative();
    return F.eval(hi) - F.eval(lo);
}

int Piecewise1D::degree() const {
    int d = -1;
    for (const Poly& p : pieces) d = std::max(d, p.degree());
    return d;
}

double Piecewise1D::eval(double x) const {
    if (empty() || x < breaks.front() || x > breaks.back()) return 0.0;
    auto it = std::upper_bound(breaks.begin(), breaks.end(), x);
    size_t i = (it == breaks.begin()) ? 0 : static_cast<size_t>(it - breaks.begin()) - 1;
    if (i >= pieces.size()) i = pieces.size() - 1;
    return pieces[i].eval(x);
}

double Piecewise1D::moment(int n) const {
    double sum = 0.0;
    std::vector<double> mono(n + 1, 0.0);
    mono[n] = 1.0;
    Poly xn{mono};
    for (size_t i = 0; i < pieces.size(); ++i)
        sum += (pieces[i] * xn).integrate(breaks[i], breaks[i + 1]);
    return sum;
}

Piecewise1D Piecewise1D::translated(double s) const {
    Piecewise1D r;
    r.breaks = breaks;
    for (double& b : r.breaks) b += s;
    for (const Poly& p : pieces) r.pieces.push_back(p.compose_linear(-s, 1.0));
    return r;
}

Piecewise1D Piecewise1D::reflected() const {
    Piecewise1D r;
    r.breaks.assign(breaks.rbegin(), breaks.rend());
    for (double& b : r.breaks) b = -b;
    for (size_t i = pieces.size(); i-- > 0;) r.pieces.push_back(pieces[i].compose_linear(0.0, -1.0));
    return r;
}

Piecewise1D Piecewise1D::scaled(double s) const {
    Piecewise1D r;
    r.breaks = breaks;
    for (const Poly& p : pieces) r.pieces.push_back(p.scaled(s));
    return r;
}

bool Piecewise1D::symmetric_about(double center, double tol) const {
    if (empty()) return true;
    double half = std::max(std::abs(support_hi() - center), std::abs(center - support_lo()));
    for (int i = 0; i <= 40; ++i) {
        double t = half * i / 40.0;
        if (std::abs(eval(center + t) - eval(center - t)) > tol) return false;
    }
    return true;
}

Piecewise1D Piecewise1D::indicator(double lo, double hi, double value) {
    Piecewise1D f;
    f.breaks = {lo, hi};
    f.pieces = {Poly::constant(value)};
    return f;
}

Piecewise1D Piecewise1D::hat(double center, double halfwidth, double peak) {
    Piecewise1D f;
    double a = center - halfwidth, b = center + halfwidth;
    f.breaks = {a, center, b};
    // rising: peak*(x-a)/halfwidth; falling: peak*(b-x)/halfwidth
    f.pieces = {Poly({-a * peak / halfwidth, peak / halfwidth}),
                Poly({b * peak / halfwidth, -peak / halfwidth})};
    return f;
}

Piecewise1D pw_multiply(const Piecewise1D& f, const Piecewise1D& g) {
    Piecewise1D r;
    if (f.empty() || g.empty()) return r;
    double lo = std::max(f.support_lo(), g.support_lo());
    double hi = std::min(f.support_hi(), g.support_hi());
    if (hi <= lo) return r;
    std::vector<double> bks;
    for (double b : f.breaks)
        if (b > lo && b < hi) bks.push_back(b);
    for (double b : g.breaks)
        if (b > lo && b < hi) bks.push_back(b);
    bks.push_back(lo);
    bks.push_back(hi);
    std::sort(bks.begin(), bks.end());
    bks.erase(std::unique(bks.begin(), bks.end(),
                          [](double a, double b) { return std::abs(a - b) < 1e-14; }),
              bks.end());
    r.breaks = bks;
    for (size_t i = 0; i + 1 < bks.size(); ++i) {
        double mid = 0.5 * (bks[i] + bks[i + 1]);
        // locate pieces containing mid
        Poly pf, pg;
        for (size_t k = 0; k + 1 < f.breaks.size(); ++k)
            if (mid >= f.breaks[k] && mid <= f.breaks[k + 1]) { pf = f.pieces[k]; break; }
        for (size_t k = 0; k + 1 < g.breaks.size(); ++k)
            if (mid >= g.breaks[k] && mid <= g.breaks[k + 1]) { pg = g.pieces[k]; break; }
        r.pieces.push_back(pf * pg);
    }
    return r;
}

Piecewise1D pw_correlate(const Piecewise1D& f, const Piecewise1D& g) {
    Piecewise1D r;
    if (f.empty() || g.empty()) return r;
    // h(u) = ∫ f(v) g(v+u) dv; support of u is [g_lo - f_hi, g_hi - f_lo]
    // Candidate breakpoints of h: all differences of g-breaks and f-breaks.
    std::vector<double> bks;
    for (double bg : g.breaks)
        for (double bf : f.breaks) bks.push_back(bg - bf);
    std::sort(bks.begin(), bks.end());
    bks.erase(std::unique(bks.begin(), bks.end(),
                          [](double a, double b) { return std::abs(a - b) < 1e-14; }),
              bks.end());
    if (bks.size() < 2) return r;

    r.breaks = bks;
    r.pieces.assign(bks.size() - 1, Poly());
    for (size_t fi = 0; fi < f.pieces.size(); ++fi) {
        double a1 = f.breaks[fi], b1 = f.breaks[fi + 1];
        for (size_t gi = 0; gi < g.pieces.size(); ++gi) {
            double a2 = g.breaks[gi], b2 = g.breaks[gi + 1];
            // overlap in v: [max(a1, a2-u), min(b1, b2-u)], nonempty for u in (a2-b1, b2-a1)
            // Bivariate product f_piece(v) * g_piece(v+u): expand into v^a u^b terms,
            // antiderivative in v, then substitute linear-in-u bounds per u-subinterval.
            const Poly& P = f.pieces[fi];
            const Poly& Q = g.pieces[gi];
            // terms[a][b] — coefficient of v^a u^b in P(v)Q(v+u)
            int dp = P.degree(), dq = Q.degree();
            if (dp < 0 || dq < 0) continue;
            std::vector<std::vector<double>> terms(dp + dq + 1,
                                                   std::vector<double>(dq + 1, 0.0));
            for (int i = 0; i <= dp; ++i)
                for (int j = 0; j <= dq; ++j)
                    for (int t = 0; t <= j; ++t)
                        terms[i + t][j - t] += P.c[i] * Q.c[j] * binom(j, t);
            // antiderivative in v: v^{a+1}/(a+1) u^b
            double ulo_all = a2 - b1, uhi_all = b2 - a1;
            for (size_t s = 0; s + 1 < bks.size(); ++s) {
                double ul = std::max(bks[s], ulo_all), uh = std::min(bks[s + 1], uhi_all);
                if (uh - ul < 1e-14) continue;
                double umid = 0.5 * (ul + uh);
                // Bounds at umid decide which bound formula is active on the whole subinterval.
                bool lo_is_a1 = a1 >= a2 - umid;
                bool hi_is_b1 = b1 <= b2 - umid;
                // hi(u) = hi_a + hi_b*u ; lo(u) = lo_a + lo_b*u
                double hi_a = hi_is_b1 ? b1 : b2, hi_b = hi_is_b1 ? 0.0 : -1.0;
                double lo_a = lo_is_a1 ? a1 : a2, lo_b = lo_is_a1 ? 0.0 : -1.0;
                Poly contrib;
                for (int a = 0; a <= dp + dq; ++a) {
                    // u-polynomial coefficient vector for v^a
                    std::vector<double> ub(dq + 1, 0.0);
                    bool any = false;
                    for (int b = 0; b <= dq; ++b) {
                        ub[b] = terms[a][b] / static_cast<double>(a + 1);
                        any = any || ub[b] != 0.0;
                    }
                    if (!any) continue;
                    Poly coef{ub};
                    // (hi(u)^{a+1} - lo(u)^{a+1}) as polynomials in u
                    Poly hi_pow = Poly::constant(1.0), lo_pow = Poly::constant(1.0);
                    Poly hi_lin({hi_a, hi_b}), lo_lin({lo_a, lo_b});
                    for (int t = 0; t < a + 1; ++t) {
                        hi_pow = hi_pow * hi_lin;
                        lo_pow = lo_pow * lo_lin;
                    }
                    contrib = contrib + coef * (hi_pow - lo_pow);
                }
                r.pieces[s] = r.pieces[s] + contrib;
            }
        }
    }
    // drop identically-zero leading/trailing pieces
    while (!r.pieces.empty() && r.pieces.front().zero()) {
        r.pieces.erase(r.pieces.begin());
        r.breaks.erase(r.breaks.begin());
    }
    while (!r.pieces.empty() && r.pieces.back().zero()) {
        r.pieces.pop_back();
        r.breaks.pop_back();
    }
    if (r.pieces.empty()) r.breaks.clear();
    return r;
}

void gauss_legendre_01(int n, std::vector<double>& nodes, std::vector<double>& weights) {
    nodes.resize(n);
    weights.resize(n);
    for (int i = 0; i < n; ++i) {
        // Newton iteration from Chebyshev initial guess, on [-1,1]
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            if (n == 1) { p1 = x; }
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            double pn = (n == 1) ? x : p1;
            double pprev = (n == 1) ? 1.0 : p0;
            pp = n * (x * pn - pprev) / (x * x - 1.0);
            double dx = pn / pp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        nodes[n - 1 - i] = 0.5 * (x + 1.0);
        weights[n - 1 - i] = 1.0 / ((1.0 - x * x) * pp * pp);
    }
}

} // namespace gridhf
