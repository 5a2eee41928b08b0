#include "gridhf/coulomb.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <sstream>

#include "gridhf/errors.hpp"

namespace gridhf {

double Box::max_side() const {
    double m = 0.0;
    for (int ax = 0; ax < 3; ++ax) m = std::max(m, hi[ax] - lo[ax]);
    return m;
}

bool Box::degenerate() const {
    for (int ax = 0; ax < 3; ++ax)
        if (hi[ax] - lo[ax] <= 0.0) return true;
    return false;
}

Box SeparableFactor::support() const {
    Box b;
    for (int ax = 0; ax < 3; ++ax) {
        b.lo[ax] = f[ax].support_lo();
        b.hi[ax] = f[ax].support_hi();
    }
    return b;
}

int SeparableFactor::degree() const {
    int d = -1;
    for (int ax = 0; ax < 3; ++ax) d = std::max(d, f[ax].degree());
    return d;
}

std::array<double, 3> SeparableFactor::centroid() const {
    Box b = support();
    return {0.5 * (b.lo[0] + b.hi[0]), 0.5 * (b.lo[1] + b.hi[1]), 0.5 * (b.lo[2] + b.hi[2])};
}

bool SeparableFactor::symmetric(double tol) const {
    auto c = centroid();
    for (int ax = 0; ax < 3; ++ax)
        if (!f[ax].symmetric_about(c[ax], tol)) return false;
    return true;
}

double TrilinearPoly::eval(double x, double y, double z) const {
    double r = 0.0;
    for (int m = 0; m < 8; ++m) {
        double t = c[m];
        if (m & 1) t *= x;
        if (m & 2) t *= y;
        if (m & 4) t *= z;
        r += t;
    }
    return r;
}

namespace {

using ld = long double;

inline ld safelog(ld coef, ld arg) { return coef == 0.0L ? 0.0L : coef * std::log(arg); }

// Triple antiderivatives of trilinear monomials over 1/R, valid on the closed
// positive octant with guarded log/arctan terms (no NaN on coordinate planes).
ld F000(ld x, ld y, ld z) {
    ld R = std::sqrt(x * x + y * y + z * z);
    return safelog(y * z, x + R) + safelog(x * z, y + R) + safelog(x * y, z + R) -
           x * x / 2 * std::atan2(y * z, x * R) - y * y / 2 * std::atan2(x * z, y * R) -
           z * z / 2 * std::atan2(x * y, z * R);
}
ld F100(ld x, ld y, ld z) {
    ld R = std::sqrt(x * x + y * y + z * z);
    return y * z * R / 3 + safelog(y * (3 * x * x + y * y) / 6, z + R) +
           safelog(z * (3 * x * x + z * z) / 6, y + R) - z * z * z / 18 - x * x * z / 3 +
           x * x * x / 3 * (std::atan2(z, x) - std::atan2(y * z, x * R));
}
ld F110(ld x, ld y, ld z) {
    ld R = std::sqrt(x * x + y * y + z * z);
    return (z * R * R * R / 4 +
            0.375L * (x * x + y * y) * (z * R + safelog(x * x + y * y, z + R))) /
           3;
}
ld F111(ld x, ld y, ld z) {
    ld R = std::sqrt(x * x + y * y + z * z);
    return R * R * R * R * R / 15;
}

ld F_eval(int n1, int n2, int n3, ld x, ld y, ld z) {
    int m = n1 | (n2 << 1) | (n3 << 2);
    switch (m) {
        case 0: return F000(x, y, z);
        case 1: return F100(x, y, z);
        case 2: return F100(y, x, z);
        case 4: return F100(z, y, x);
        case 3: return F110(x, y, z);
        case 5: return F110(x, z, y);
        case 6: return F110(y, z, x);
        default: return F111(x, y, z);
    }
}

// Integral of x^n1 y^n2 z^n3 / |x| over an axis-aligned box (singularity at
// the origin): split at coordinate planes, reflect to the positive octant,
// alternating corner sum of the antiderivative.
ld mono_box(int n1, int n2, int n3, const std::array<double, 3>& lo,
            const std::array<double, 3>& hi) {
    int n[3] = {n1, n2, n3};
    std::array<std::array<std::pair<ld, ld>, 2>, 3> segs;
    std::array<int, 3> nseg;
    for (int ax = 0; ax < 3; ++ax) {
        ld a = lo[ax], b = hi[ax];
        if (a < 0.0L && 0.0L < b) {
            segs[ax][0] = {a, 0.0L};
            segs[ax][1] = {0.0L, b};
            nseg[ax] = 2;
        } else {
            segs[ax][0] = {a, b};
            nseg[ax] = 1;
        }
    }
    ld total = 0.0L;
    for (int sx = 0; sx < nseg[0]; ++sx)
        for (int sy = 0; sy < nseg[1]; ++sy)
            for (int sz = 0; sz < nseg[2]; ++sz) {
                std::pair<ld, ld> sub[3] = {segs[0][sx], segs[1][sy], segs[2][sz]};
                ld sign = 1.0L;
                ld corner[3][2];
                for (int ax = 0; ax < 3; ++ax) {
                    ld a = sub[ax].first, b = sub[ax].second;
                    if (b <= 0.0L) {
                        ld t = a;
                        a = -b;
                        b = -t;
                        if (n[ax] & 1) sign = -sign;
                    }
                    corner[ax][0] = a;
                    corner[ax][1] = b;
                }
                ld s = 0.0L;
                for (int ix = 0; ix < 2; ++ix)
                    for (int iy = 0; iy < 2; ++iy)
                        for (int iz = 0; iz < 2; ++iz) {
                            ld v = F_eval(n1, n2, n3, corner[0][ix], corner[1][iy], corner[2][iz]);
                            s += ((3 - ix - iy - iz) & 1) ? -v : v;
                        }
                total += sign * s;
            }
    return total;
}

struct GaussRule {
    std::vector<double> x, w;  // on [0,1]
};

const GaussRule& gauss_rule(int n) {
    static std::mutex mu;
    static std::unordered_map<int, GaussRule> rules;
    std::lock_guard<std::mutex> lk(mu);
    auto it = rules.find(n);
    if (it == rules.end()) {
        GaussRule r;
        gauss_legendre_01(n, r.x, r.w);
        it = rules.emplace(n, std::move(r)).first;
    }
    return it->second;
}

double eval_axis_polys(const std::array<Poly, 3>& p, double x, double y, double z) {
    return p[0].eval(x) * p[1].eval(y) * p[2].eval(z);
}

// Plain tensor-product Gauss for a box well separated from the singularity.
double gauss_box_integral(const Box& box, const std::array<Poly, 3>& polys,
                          const std::array<double, 3>& R, int order) {
    const GaussRule& g = gauss_rule(order);
    double len[3] = {box.hi[0] - box.lo[0], box.hi[1] - box.lo[1], box.hi[2] - box.lo[2]};
    double total = 0.0;
    for (int i = 0; i < order; ++i) {
        double x = box.lo[0] + len[0] * g.x[i];
        double px = polys[0].eval(x);
        if (px == 0.0 && polys[0].degree() <= 0) continue;
        for (int j = 0; j < order; ++j) {
            double y = box.lo[1] + len[1] * g.x[j];
            double pxy = px * polys[1].eval(y);
            for (int k = 0; k < order; ++k) {
                double z = box.lo[2] + len[2] * g.x[k];
                double dx = x - R[0], dy = y - R[1], dz = z - R[2];
                total += g.w[i] * g.w[j] * g.w[k] * pxy * polys[2].eval(z) /
                         std::sqrt(dx * dx + dy * dy + dz * dz);
            }
        }
    }
    return total * len[0] * len[1] * len[2];
}

} // namespace

double monomial_coulomb_antiderivative(int n1, int n2, int n3, const std::array<double, 3>& pt) {
    return static_cast<double>(F_eval(n1, n2, n3, pt[0], pt[1], pt[2]));
}

double box_coulomb_integral(const Box& box, const TrilinearPoly& poly,
                            const std::array<double, 3>& R, bool* degenerate) {
    if (degenerate) *degenerate = false;
    if (box.degenerate()) {
        if (degenerate) *degenerate = true;
        return 0.0;
    }
    // Shift to u = x - R: poly(u + R) is again trilinear.
    TrilinearPoly q;
    for (int m = 0; m < 8; ++m) {
        if (poly.c[m] == 0.0) continue;
        // each set bit contributes (u_ax + R_ax); expand over subsets
        int bits = m;
        for (int sub = bits;; sub = (sub - 1) & bits) {
            double coef = poly.c[m];
            for (int ax = 0; ax < 3; ++ax)
                if ((bits & (1 << ax)) && !(sub & (1 << ax))) coef *= R[ax];
            q.c[sub] += coef;
            if (sub == 0) break;
        }
    }
    std::array<double, 3> lo{box.lo[0] - R[0], box.lo[1] - R[1], box.lo[2] - R[2]};
    std::array<double, 3> hi{box.hi[0] - R[0], box.hi[1] - R[1], box.hi[2] - R[2]};
    ld total = 0.0L;
    for (int m = 0; m < 8; ++m) {
        if (q.c[m] == 0.0) continue;
        total += (ld)q.c[m] * mono_box(m & 1, (m >> 1) & 1, (m >> 2) & 1, lo, hi);
    }
    return static_cast<double>(total);
}

double duffy_box_integral(const Box& box, const std::array<Poly, 3>& axis_polys,
                          const std::array<double, 3>& R, int order) {
    if (box.degenerate()) return 0.0;
    // Split at the coordinate planes of R so the apex is a corner of every sub-box.
    std::array<std::array<std::pair<double, double>, 2>, 3> segs;
    std::array<int, 3> nseg;
    for (int ax = 0; ax < 3; ++ax) {
        double a = box.lo[ax], b = box.hi[ax], c = R[ax];
        if (a < c && c < b) {
            segs[ax][0] = {a, c};
            segs[ax][1] = {c, b};
            nseg[ax] = 2;
        } else {
            segs[ax][0] = {a, b};
            nseg[ax] = 1;
        }
    }
    const GaussRule& g = gauss_rule(order);
    double total = 0.0;
    for (int sx = 0; sx < nseg[0]; ++sx)
        for (int sy = 0; sy < nseg[1]; ++sy)
            for (int sz = 0; sz < nseg[2]; ++sz) {
                double L[3] = {segs[0][sx].first, segs[1][sy].first, segs[2][sz].first};
                double H[3] = {segs[0][sx].second, segs[1][sy].second, segs[2][sz].second};
                // Signed cones from the apex over each face: x = R + t (P - R).
                for (int ax = 0; ax < 3; ++ax) {
                    int ax1 = (ax == 0) ? 1 : 0;
                    int ax2 = (ax == 2) ? 1 : 2;
                    for (int side = 0; side < 2; ++side) {
                        double fc = side ? H[ax] : L[ax];
                        double hgt = fc - R[ax];  // signed height; also D·n for unit axis normal
                        if (hgt == 0.0) continue;
                        double sign = side ? 1.0 : -1.0;
                        double span1 = H[ax1] - L[ax1], span2 = H[ax2] - L[ax2];
                        double area = span1 * span2;
                        double acc_face = 0.0;
                        for (int iu = 0; iu < order; ++iu) {
                            double u = L[ax1] + span1 * g.x[iu];
                            for (int iv = 0; iv < order; ++iv) {
                                double v = L[ax2] + span2 * g.x[iv];
                                double D[3];
                                D[ax] = hgt;
                                D[ax1] = u - R[ax1];
                                D[ax2] = v - R[ax2];
                                double nrm = std::sqrt(D[0] * D[0] + D[1] * D[1] + D[2] * D[2]);
                                double acc_t = 0.0;
                                for (int it = 0; it < order; ++it) {
                                    double t = g.x[it];
                                    acc_t += g.w[it] * t *
                                             eval_axis_polys(axis_polys, R[0] + t * D[0],
                                                             R[1] + t * D[1], R[2] + t * D[2]);
                                }
                                acc_face += g.w[iu] * g.w[iv] * acc_t / nrm;
                            }
                        }
                        total += sign * hgt * area * acc_face;
                    }
                }
            }
    return total;
}

double coulomb_integral(const SeparableFactor& s, const std::array<double, 3>& R) {
    if (s.empty()) return 0.0;
    double total = 0.0;
    const Piecewise1D& fx = s.f[0];
    const Piecewise1D& fy = s.f[1];
    const Piecewise1D& fz = s.f[2];
    for (size_t i = 0; i < fx.pieces.size(); ++i) {
        if (fx.pieces[i].zero()) continue;
        for (size_t j = 0; j < fy.pieces.size(); ++j) {
            if (fy.pieces[j].zero()) continue;
            for (size_t k = 0; k < fz.pieces.size(); ++k) {
                if (fz.pieces[k].zero()) continue;
                Box b;
                b.lo = {fx.breaks[i], fy.breaks[j], fz.breaks[k]};
                b.hi = {fx.breaks[i + 1], fy.breaks[j + 1], fz.breaks[k + 1]};
                if (b.degenerate()) continue;
                const Poly& px = fx.pieces[i];
                const Poly& py = fy.pieces[j];
                const Poly& pz = fz.pieces[k];
                int dmax = std::max({px.degree(), py.degree(), pz.degree()});
                if (dmax <= 1) {
                    // product of three (at most) linear factors is trilinear: exact path
                    TrilinearPoly t;
                    double cx[2] = {px.c.size() > 0 ? px.c[0] : 0.0, px.c.size() > 1 ? px.c[1] : 0.0};
                    double cy[2] = {py.c.size() > 0 ? py.c[0] : 0.0, py.c.size() > 1 ? py.c[1] : 0.0};
                    double cz[2] = {pz.c.size() > 0 ? pz.c[0] : 0.0, pz.c.size() > 1 ? pz.c[1] : 0.0};
                    for (int a = 0; a < 2; ++a)
                        for (int bb = 0; bb < 2; ++bb)
                            for (int cc = 0; cc < 2; ++cc)
                                t.c[a | (bb << 1) | (cc << 2)] = cx[a] * cy[bb] * cz[cc];
                    total += box_coulomb_integral(b, t, R);
                } else {
                    // distance from R to the box decides cone vs plain quadrature
                    double d2 = 0.0;
                    for (int ax = 0; ax < 3; ++ax) {
                        double d = std::max({b.lo[ax] - R[ax], R[ax] - b.hi[ax], 0.0});
                        d2 += d * d;
                    }
                    double side = b.max_side();
                    std::array<Poly, 3> polys{px, py, pz};
                    if (d2 > 9.0 * side * side)
                        total += gauss_box_integral(b, polys, R, 6);
                    else if (d2 > 2.25 * side * side)
                        total += gauss_box_integral(b, polys, R, 8);
                    else
                        total += duffy_box_integral(b, polys, R, 12);
                }
            }
        }
    }
    return total;
}

std::pair<SeparableFactor, Box> reduce_double_to_single(const SeparableFactor& p_factor,
                                                        const SeparableFactor& q_factor) {
    SeparableFactor z;
    for (int ax = 0; ax < 3; ++ax) {
        const Piecewise1D& fp = p_factor.f[ax];
        const Piecewise1D& fq = q_factor.f[ax];
        if (fp.empty() || fq.empty()) {
            if (fp.empty() != fq.empty()) {
                std::ostringstream os;
                os << "reduce_double_to_single: factor support mismatch on axis " << ax;
                throw DimensionError(os.str());
            }
            return {SeparableFactor{}, Box{}};
        }
        z.f[ax] = pw_correlate(fq, fp);
    }
    Box omega = z.empty() ? Box{} : z.support();
    return {z, omega};
}

double MomentTable::dipole_like(int n, int i) const {
    double v = mu[n][i];
    for (int ax = 0; ax < 3; ++ax)
        if (ax != i) v *= mu[0][ax];
    return v;
}

double MomentTable::dipole(int i) const { return dipole_like(1, i); }

double MomentTable::quad(int i, int j) const {
    if (i == j) return dipole_like(2, i);
    double v = 1.0;
    for (int ax = 0; ax < 3; ++ax) {
        if (ax == i || ax == j)
            v *= mu[1][ax];
        else
            v *= mu[0][ax];
    }
    return v;
}

MomentTable compute_moments(const SeparableFactor& s) {
    MomentTable m;
    if (s.empty()) return m;
    Box b = s.support();
    double r2 = 0.0;
    for (int ax = 0; ax < 3; ++ax) {
        m.center[ax] = 0.5 * (b.lo[ax] + b.hi[ax]);
        double half = 0.5 * (b.hi[ax] - b.lo[ax]);
        r2 += half * half;
        Piecewise1D centered = s.f[ax].translated(-m.center[ax]);
        for (int n = 0; n < 4; ++n) {
            double v = centered.moment(n);
            // symmetric factors have exactly-zero odd moments; snap roundoff
            if ((n & 1) && centered.symmetric_about(0.0) && std::abs(v) < 1e-13) v = 0.0;
            m.mu[n][ax] = v;
        }
    }
    m.radius = std::sqrt(r2);
    return m;
}

double far_field_integral(const MomentTable& m, const std::array<double, 3>& R, int k2) {
    double d[3] = {R[0] - m.center[0], R[1] - m.center[1], R[2] - m.center[2]};
    double r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
    double r = std::sqrt(r2);
    if (r <= 0.0) throw UnachievableAccuracyError("far-field expansion at zero distance");
    double v = m.mass() / r;
    if (k2 >= 2) {
        double dip = 0.0;
        for (int i = 0; i < 3; ++i) dip += m.dipole(i) * d[i];
        v += dip / (r2 * r);
    }
    if (k2 >= 3) {
        double q = 0.0;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                q += m.quad(i, j) * (3.0 * d[i] * d[j] - (i == j ? r2 : 0.0));
        v += 0.5 * q / (r2 * r2 * r);
    }
    return v;
}

double far_field_error(const MomentTable& m, double dist, int k2) {
    if (dist <= 0.0) return HUGE_VAL;
    double rho = m.radius;
    return std::abs(m.mass()) * std::pow(rho, k2 + 1) / std::pow(dist, k2 + 2);
}

MethodChoice select_method(double dist, const MomentTable& moments, double eta,
                           const CalibrationTable& calib) {
    if (eta <= 0.0) throw UnachievableAccuracyError("target accuracy must be positive");
    if (eta < calib.eps_floor) {
        std::ostringstream os;
        os << "requested accuracy " << eta << " below the calibrated floor " << calib.eps_floor;
        throw UnachievableAccuracyError(os.str());
    }
    // switch radius: where the k2=3 far field first meets eta
    double rho = moments.radius;
    double alpha = std::pow(std::abs(moments.mass()) * rho * rho * rho * rho /
                                std::max(eta, 1e-300),
                            0.2);
    alpha = std::max(alpha, 2.0 * rho);  // never expand from inside the support
    MethodChoice c;
    if (dist < alpha) {
        c.algorithm = IntegralAlgorithm::near_field;
        c.k = calib.k1;
        c.predicted_eps = calib.eps_floor;
        c.predicted_cost = calib.near_cost_per_cell * std::pow(calib.k1, 3);
        return c;
    }
    for (int k2 = 1; k2 <= 3; ++k2) {
        double eps = far_field_error(moments, dist, k2);
        if (eps <= eta || k2 == 3) {
            c.algorithm = IntegralAlgorithm::far_field;
            c.k = k2;
            c.predicted_eps = eps;
            c.predicted_cost = calib.far_cost;
            return c;
        }
    }
    return c;
}

namespace {
std::string cache_key(const Box& b, int k1, const std::array<double, 3>& R) {
    char buf[200];
    std::snprintf(buf, sizeof(buf), "%a,%a,%a,%a,%a,%a|%d|%a,%a,%a", b.lo[0], b.lo[1], b.lo[2],
                  b.hi[0], b.hi[1], b.hi[2], k1, R[0], R[1], R[2]);
    return buf;
}
} // namespace

double near_field_integral(const SeparableFactor& s, const std::array<double, 3>& R, int k1,
                           FWeightCache* cache) {
    if (s.empty() || k1 < 1) return 0.0;
    Box b = s.support();
    // F weights: for every subdivision cell, the exact integral of each of the
    // 8 trilinear corner cardinals against 1/|x-R|. Independent of s.
    const std::vector<double>* weights = nullptr;
    std::vector<double> local;
    if (cache) {
        std::string key = cache_key(b, k1, R);
        auto it = cache->entries.find(key);
        if (it != cache->entries.end()) {
            ++cache->hits;
            weights = &it->second;
        } else {
            ++cache->misses;
        }
        if (!weights) {
            local.reserve(static_cast<size_t>(k1) * k1 * k1 * 8);
        }
    }
    double step[3], tot = 0.0;
    for (int ax = 0; ax < 3; ++ax) step[ax] = (b.hi[ax] - b.lo[ax]) / k1;
    size_t widx = 0;
    for (int i = 0; i < k1; ++i)
        for (int j = 0; j < k1; ++j)
            for (int k = 0; k < k1; ++k) {
                Box cell;
                cell.lo = {b.lo[0] + i * step[0], b.lo[1] + j * step[1], b.lo[2] + k * step[2]};
                cell.hi = {cell.lo[0] + step[0], cell.lo[1] + step[1], cell.lo[2] + step[2]};
                for (int corner = 0; corner < 8; ++corner) {
                    double w;
                    if (weights) {
                        w = (*weights)[widx++];
                    } else {
                        // cardinal trilinear: product of (x-x0)/dx or (x1-x)/dx
                        TrilinearPoly card;
                        card.c[0] = 1.0;
                        for (int ax = 0; ax < 3; ++ax) {
                            double a0, a1;
                            if (corner & (1 << ax)) {
                                a0 = -cell.lo[ax] / step[ax];
                                a1 = 1.0 / step[ax];
                            } else {
                                a0 = cell.hi[ax] / step[ax];
                                a1 = -1.0 / step[ax];
                            }
                            TrilinearPoly next;
                            for (int mask = 0; mask < 8; ++mask) {
                                if (card.c[mask] == 0.0) continue;
                                next.c[mask] += card.c[mask] * a0;
                                next.c[mask | (1 << ax)] += card.c[mask] * a1;
                            }
                            card = next;
                        }
                        w = box_coulomb_integral(cell, card, R);
                        if (cache) local.push_back(w);
                    }
                    double nx = cell.lo[0] + ((corner & 1) ? step[0] : 0.0);
                    double ny = cell.lo[1] + ((corner & 2) ? step[1] : 0.0);
                    double nz = cell.lo[2] + ((corner & 4) ? step[2] : 0.0);
                    tot += w * s.value(nx, ny, nz);
                }
            }
    if (cache && !weights) cache->entries.emplace(cache_key(b, k1, R), std::move(local));
    return tot;
}

double engine_integral(const SeparableFactor& s, const MomentTable& moments,
                       const std::array<double, 3>& R, double eta, const CalibrationTable& calib) {
    double d[3] = {R[0] - moments.center[0], R[1] - moments.center[1], R[2] - moments.center[2]};
    double dist = std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
    MethodChoice choice = select_method(dist, moments, eta, calib);
    if (choice.algorithm == IntegralAlgorithm::far_field)
        return far_field_integral(moments, R, choice.k);
    return coulomb_integral(s, R);
}

CalibrationTable calibrate_engine(const SeparableFactor& reference_s, double eta) {
    CalibrationTable calib;
    std::array<double, 3> origin = reference_s.centroid();
    double exact = coulomb_integral(reference_s, origin);
    int k1 = 2;
    for (; k1 <= 64; k1 *= 2) {
        double approx = near_field_integral(reference_s, origin, k1);
        if (std::abs(approx - exact) <= std::max(eta, 1e-9)) break;
    }
    calib.k1 = std::min(k1, 64);
    calib.eps_floor = 1e-10;
    return calib;
}

} // namespace gridhf
