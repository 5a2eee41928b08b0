#pragma once
#include <array>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "piecewise.hpp"

namespace gridhf {

struct Box {
    std::array<double, 3> lo{0, 0, 0};
    std::array<double, 3> hi{0, 0, 0};
    double max_side() const;
    bool degenerate() const;
};

// s(x) = f[0](x1) * f[1](x2) * f[2](x3)
struct SeparableFactor {
    std::array<Piecewise1D, 3> f;

    bool empty() const { return f[0].empty() || f[1].empty() || f[2].empty(); }
    Box support() const;
    int degree() const;
    double value(double x, double y, double z) const {
        return f[0].eval(x) * f[1].eval(y) * f[2].eval(z);
    }
    std::array<double, 3> centroid() const;
    bool symmetric(double tol = 1e-12) const;
};

// Trilinear polynomial c[mask], mask bit 0/1/2 selects power of x/y/z.
struct TrilinearPoly {
    std::array<double, 8> c{0, 0, 0, 0, 0, 0, 0, 0};
    double eval(double x, double y, double z) const;
};

// Closed-form triple antiderivative of x^n1 y^n2 z^n3 / |x| (Lemma-1 family),
// finite everywhere by guarded term evaluation.
double monomial_coulomb_antiderivative(int n1, int n2, int n3, const std::array<double, 3>& pt);

// Exact integral of poly(x)/|x-R| over the box (degree <= 1 per axis).
double box_coulomb_integral(const Box& box, const TrilinearPoly& poly,
                            const std::array<double, 3>& R, bool* degenerate = nullptr);

// Integral of (prod_ax p_ax(x_ax)) / |x-R| over the box by signed-cone (Duffy)
// quadrature; exact singularity cancellation, any polynomial degree.
double duffy_box_integral(const Box& box, const std::array<Poly, 3>& axis_polys,
                          const std::array<double, 3>& R, int order = 14);

// Exact/near-exact integral of s(x)/|x-R| over the support of s, cell by cell:
// analytic corner sums for per-axis degree <= 1 cells, cone quadrature otherwise.
double coulomb_integral(const SeparableFactor& s, const std::array<double, 3>& R);

// Theorem-1 reduction: per-axis correlation of the two factors.
std::pair<SeparableFactor, Box> reduce_double_to_single(const SeparableFactor& p_factor,
                                                        const SeparableFactor& q_factor);

struct MomentTable {
    std::array<double, 3> center{0, 0, 0};      // expansion point (support box center)
    // raw per-axis centered moments mu[n][ax] = ∫ f_ax(x) (x-c_ax)^n dx, n = 0..3
    std::array<std::array<double, 3>, 4> mu{};
    double radius = 0.0;                        // support half-diameter

    double mass() const { return mu[0][0] * mu[0][1] * mu[0][2]; }
    double dipole(int i) const;                 // ∫ s (x_i-c_i); zero for symmetric s
    double quad(int i, int j) const;            // ∫ s (x_i-c_i)(x_j-c_j)
    double third(int i) const { return dipole_like(3, i); }
    double dipole_like(int n, int i) const;
};

MomentTable compute_moments(const SeparableFactor& s);
double far_field_integral(const MomentTable& moments, const std::array<double, 3>& R, int k2);
// Predicted truncation error of the order-k2 expansion at distance dist.
double far_field_error(const MomentTable& moments, double dist, int k2);

enum class IntegralAlgorithm { near_field, far_field };

struct MethodChoice {
    IntegralAlgorithm algorithm = IntegralAlgorithm::near_field;
    int k = 1;           // k1 for near field, k2 for far field
    double predicted_eps = 0.0;
    double predicted_cost = 0.0;  // operation-count estimate
};

struct CalibrationTable {
    int k1 = 4;               // near-field subdivision fixed at calibration time
    double eps_floor = 1e-10; // best accuracy the engine promises
    double near_cost_per_cell = 200.0;
    double far_cost = 20.0;
};

MethodChoice select_method(double dist, const MomentTable& moments, double eta,
                           const CalibrationTable& calib);

// Cache of F weights: per (subdivision geometry, R) the 8 corner weights of
// every subdivision cell. Keyed exactly; deterministic values make races benign.
struct FWeightCache {
    std::unordered_map<std::string, std::vector<double>> entries;
    long hits = 0;
    long misses = 0;
};

// Eq.-4.1.7 near field: trilinear interpolation of s on a k1^3 subdivision of
// its support with exactly integrated cells; F weights depend only on R.
double near_field_integral(const SeparableFactor& s, const std::array<double, 3>& R, int k1,
                           FWeightCache* cache = nullptr);

// Full dispatch used by the table builders.
double engine_integral(const SeparableFactor& s, const MomentTable& moments,
                       const std::array<double, 3>& R, double eta, const CalibrationTable& calib);

// Measures the near-field subdivision and accuracy floor for a basis-product
// shape against the exact integrator.
CalibrationTable calibrate_engine(const SeparableFactor& reference_s, double eta);

} // namespace gridhf
