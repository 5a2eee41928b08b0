#pragma once
#include <vector>

namespace gridhf {

// Dense monomial-coefficient polynomial, c[0] + c[1] x + ...
struct Poly {
    std::vector<double> c;

    Poly() = default;
    explicit Poly(std::vector<double> coeffs) : c(std::move(coeffs)) { trim(); }
    static Poly constant(double v) { return Poly({v}); }

    int degree() const { return c.empty() ? -1 : static_cast<int>(c.size()) - 1; }
    bool zero() const { return c.empty(); }
    double eval(double x) const;
    void trim();

    Poly operator+(const Poly& o) const;
    Poly operator-(const Poly& o) const;
    Poly operator*(const Poly& o) const;
    Poly scaled(double s) const;
    Poly antiderivative() const;
    Poly derivative() const;
    // p(a + b*x) as a polynomial in x
    Poly compose_linear(double a, double b) const;
    double integrate(double lo, double hi) const;
};

// Piecewise polynomial on a sorted breakpoint list; zero outside [breaks.front, breaks.back].
struct Piecewise1D {
    std::vector<double> breaks;   // size = pieces.size() + 1 (empty function: both empty)
    std::vector<Poly> pieces;     // global-coordinate coefficients

    bool empty() const { return pieces.empty(); }
    double support_lo() const { return breaks.empty() ? 0.0 : breaks.front(); }
    double support_hi() const { return breaks.empty() ? 0.0 : breaks.back(); }
    int degree() const;
    double eval(double x) const;
    double moment(int n) const;                    // ∫ x^n f(x) dx
    double mass() const { return moment(0); }
    Piecewise1D translated(double s) const;
    Piecewise1D reflected() const;                 // f(-x)
    Piecewise1D scaled(double s) const;
    bool symmetric_about(double center, double tol = 1e-12) const;

    static Piecewise1D indicator(double lo, double hi, double value = 1.0);
    static Piecewise1D hat(double center, double halfwidth, double peak = 1.0);
};

// Pointwise product; support is the intersection.
Piecewise1D pw_multiply(const Piecewise1D& f, const Piecewise1D& g);
// Correlation h(u) = ∫ f(v) g(v+u) dv, computed exactly.
Piecewise1D pw_correlate(const Piecewise1D& f, const Piecewise1D& g);

// Gauss-Legendre rule on [0,1].
void gauss_legendre_01(int n, std::vector<double>& nodes, std::vector<double>& weights);

} // namespace gridhf
