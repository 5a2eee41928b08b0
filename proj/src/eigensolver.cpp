#include "gridhf/eigensolver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>

#include <Eigen/Eigenvalues>

#include "gridhf/errors.hpp"

namespace gridhf {

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

// twice-repeated modified Gram-Schmidt against both vector sets
void orthogonalize(std::vector<double>& v, const std::vector<std::vector<double>>& locked,
                   const std::vector<std::vector<double>>& basis) {
    for (int pass = 0; pass < 2; ++pass) {
        for (const auto& u : locked) {
            double c = dot(u, v);
            for (size_t i = 0; i < v.size(); ++i) v[i] -= c * u[i];
        }
        for (const auto& u : basis) {
            double c = dot(u, v);
            for (size_t i = 0; i < v.size(); ++i) v[i] -= c * u[i];
        }
    }
}

} // namespace

std::vector<double> Preconditioner::solve(const std::vector<double>& r, double nu) const {
    auto guarded = [this](double shift) {
        return C.apply_function(
            [this](double x) {
                return std::abs(x) < guard ? std::numeric_limits<double>::infinity() : 1.0 / x;
            },
            -shift);
    };
    try {
        return guarded(nu).matvec(r);
    } catch (const SingularSpectrumError&) {
        return guarded(nu - 1e-10).matvec(r);
    }
}

Preconditioner build_preconditioner(Preconditioner::Kind kind, const HFSystem& sys,
                                    const std::vector<double>& z, int m) {
    const GridSpec& g = sys.grid;
    long N = g.size();
    double h = g.h;
    std::array<int, 3> dims = {g.n[0], g.n[1], g.n[2]};

    // kinetic part is already circulant
    ThreeLevelCirculant kin = ThreeLevelCirculant::from_stencil(sys.A, dims);
    for (double& v : kin.generator) v *= 2.0 / (h * h);

    // circulant projection of the full displayed operator: diagonal averages
    std::vector<double> gen = kin.generator;
    double qtot = 0.0;
    for (const Nucleus& nuc : sys.nuclei.entries) qtot += nuc.charge;
    for (const auto& [off, vals] : sys.W.w) {
        double mean = 0.0;
        for (double v : vals) mean += v;
        mean /= static_cast<double>(N);
        gen[g.wrap(-off.d[0], -off.d[1], -off.d[2])] += -4.0 / h * qtot * mean;
    }
    double zbar = 0.0;
    if (!z.empty())
        for (double v : z) zbar += v / static_cast<double>(N);
    gen[0] += 4.0 / h * (sys.r1.alpha * zbar + sys.r1.beta * (2.0 * m - 1.0));

    // squared Frobenius norm of the non-circulant remainder
    double resid2 = 0.0;
    for (const auto& [off, vals] : sys.W.w) {
        double mean = 0.0;
        for (double v : vals) mean += v;
        mean /= static_cast<double>(N);
        for (long a = 0; a < N; ++a) {
            auto ia = g.unflatten(a);
            double b = 0.0;
            for (const Nucleus& nuc : sys.nuclei.entries)
                b += nuc.charge *
                     vals[g.wrap(ia[0] - nuc.cell[0], ia[1] - nuc.cell[1], ia[2] - nuc.cell[2])];
            double r = -4.0 / h * (b - qtot * mean);
            if (off.d[0] == 0 && off.d[1] == 0 && off.d[2] == 0 && !z.empty())
                r += 4.0 / h * sys.r1.alpha * (z[a] - zbar);
            resid2 += r * r;
        }
    }

    Preconditioner P;
    P.kind = kind;
    if (kind == Preconditioner::Kind::circulant_fit) {
        P.C.dims = dims;
        P.C.generator = gen;
        double cf2 = 0.0;
        for (double v : gen) cf2 += v * v;
        cf2 *= static_cast<double>(N);
        P.ratio = cf2 > 0.0 ? std::sqrt(resid2 / cf2) : std::numeric_limits<double>::infinity();
    } else {
        P.C = kin;
        double diff2 = resid2, cf2 = 0.0;
        for (long a = 0; a < N; ++a) {
            double d = gen[a] - kin.generator[a];
            diff2 += static_cast<double>(N) * d * d;
            cf2 += static_cast<double>(N) * kin.generator[a] * kin.generator[a];
        }
        P.ratio = cf2 > 0.0 ? std::sqrt(diff2 / cf2) : std::numeric_limits<double>::infinity();
    }
    return P;
}

DavidsonResult davidson(const LinearOp& apply_A, const Preconditioner& P,
                        std::vector<double> psi0, double eps, int maxspace,
                        const std::vector<std::vector<double>>& locked) {
    const long N = static_cast<long>(psi0.size());
    auto t0 = std::chrono::steady_clock::now();
    auto wall = [&] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };
    std::mt19937 rng(0x9e3779b9u);
    std::normal_distribution<double> nd;

    orthogonalize(psi0, locked, {});
    double n0 = norm(psi0);
    if (n0 < 1e-12) {
        for (double& v : psi0) v = nd(rng);
        orthogonalize(psi0, locked, {});
        n0 = norm(psi0);
    }
    for (double& v : psi0) v /= n0;

    DavidsonResult res;
    double best_rnorm = std::numeric_limits<double>::infinity();
    int since_improve = 0;
    int restart = 0;

    while (true) {
        std::vector<std::vector<double>> q{psi0};
        std::vector<double> w = apply_A(psi0);
        Eigen::MatrixXd H(1, 1);
        H(0, 0) = dot(psi0, w);
        double nu = H(0, 0);
        std::vector<double> psi = psi0;
        std::vector<double> Apsi = w;

        for (int i = 1; i <= maxspace; ++i) {
            std::vector<double> r(N);
            for (long a = 0; a < N; ++a) r[a] = Apsi[a] - nu * psi[a];
            double rn = norm(r);
            ++res.iterations;
            res.log.push_back({restart, res.iterations, nu, rn, wall()});
            if (rn < eps) {
                res.nu = nu;
                res.psi = psi;
                res.residual = rn;
                return res;
            }
            if (rn < best_rnorm * (1.0 - 1e-12)) {
                best_rnorm = rn;
                since_improve = 0;
            } else if (++since_improve >= 3 * maxspace) {
                throw StagnationError("Davidson stalled: residual " + std::to_string(rn) +
                                      " after " + std::to_string(res.iterations) + " iterations");
            }

            std::vector<double> t = P.solve(r, nu);
            double tn = norm(t);
            orthogonalize(t, locked, q);
            if (norm(t) < 1e-12 * (tn + 1.0)) {
                // an exact preconditioner maps the residual back onto psi;
                // fall back to the preconditioned iterate (Olsen direction)
                t = P.solve(psi, nu);
                orthogonalize(t, locked, q);
            }
            if (norm(t) < 1e-12 * (tn + 1.0)) {
                for (double& v : t) v = nd(rng);
                orthogonalize(t, locked, q);
            }
            double nt = norm(t);
            if (nt < 1e-14)
                throw StagnationError("Davidson search direction collapsed");
            for (double& v : t) v /= nt;
            q.push_back(t);
            w = apply_A(t);

            int k = static_cast<int>(q.size());
            H.conservativeResize(k, k);
            for (int j = 0; j < k; ++j) {
                H(j, k - 1) = dot(q[j], w);
                H(k - 1, j) = H(j, k - 1);
            }
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
            int lo;
            es.eigenvalues().minCoeff(&lo);
            nu = es.eigenvalues()(lo);
            Eigen::VectorXd alpha = es.eigenvectors().col(lo);
            psi.assign(N, 0.0);
            for (int j = 0; j < k; ++j)
                for (long a = 0; a < N; ++a) psi[a] += alpha(j) * q[j][a];
            // second operator application per iteration: the paper's chosen
            // trade-off keeps only the basis, not A times the basis
            Apsi = apply_A(psi);
        }
        psi0 = psi;
        double pn = norm(psi0);
        for (double& v : psi0) v /= pn;
        ++restart;
    }
}

namespace {

struct InnerSolve {
    OrbitalSet orbitals;
    double max_residual = 0.0;
    long inner = 0;
};

InnerSolve solve_orbitals(const LinearOp& op, const Preconditioner& P, const OrbitalSet& start,
                          int m, long N, double eps, int maxspace, std::ostream* log, int outer) {
    InnerSolve out;
    std::vector<std::vector<double>> locked;
    std::mt19937 rng(2026);
    std::normal_distribution<double> nd;
    for (int i = 0; i < m; ++i) {
        std::vector<double> psi0;
        if (i < static_cast<int>(start.c.size()))
            psi0 = start.c[i];
        else {
            psi0.resize(N);
            for (double& v : psi0) v = nd(rng);
        }
        DavidsonResult r = davidson(op, P, std::move(psi0), eps, maxspace, locked);
        if (log)
            for (const DavidsonLogEntry& e : r.log)
                *log << outer << '\t' << e.iter << '\t' << e.nu << '\t' << e.rnorm << '\t'
                     << e.wall << '\n';
        out.inner += r.iterations;
        out.max_residual = std::max(out.max_residual, r.residual);
        out.orbitals.eps.push_back(r.nu);
        locked.push_back(r.psi);
        out.orbitals.c.push_back(std::move(locked.back()));
        locked.back() = out.orbitals.c.back();
    }
    return out;
}

std::vector<double> nodal_density(const OrbitalSet& orb) {
    std::vector<double> z(orb.n(), 0.0);
    for (const auto& c : orb.c)
        for (long a = 0; a < orb.n(); ++a) z[a] += c[a] * c[a];
    return z;
}

// one fixed-point phase in the given repulsion mode; updates orb/state in place
bool fixed_point(const HFSystem& sys, const ScfOptions& opt, VeeMode mode, OrbitalSet& orb,
                 ScfState& state, long* inner_counter) {
    long N = sys.grid.size();
    double prev_E = state.energy_history.empty() ? std::numeric_limits<double>::quiet_NaN()
                                                 : state.energy_history.back();
    for (int k = 0; k < opt.max_outer; ++k) {
        FockOperator F = make_fock_operator(sys, orb, mode);
        Preconditioner P = build_preconditioner(opt.prec, sys, nodal_density(orb), opt.m);
        LinearOp op = [&F](const std::vector<double>& x) { return F.apply(x); };
        InnerSolve inner = solve_orbitals(op, P, orb, opt.m, N, opt.inner_tol, opt.maxspace,
                                          opt.log, state.iterations + 1);
        *inner_counter += inner.inner;
        state.total_inner += inner.inner;
        if (opt.mixing > 0.0) {
            for (int i = 0; i < opt.m && i < static_cast<int>(orb.c.size()); ++i) {
                for (long a = 0; a < N; ++a)
                    inner.orbitals.c[i][a] =
                        (1.0 - opt.mixing) * inner.orbitals.c[i][a] + opt.mixing * orb.c[i][a];
                double nn = std::sqrt(dot(inner.orbitals.c[i], inner.orbitals.c[i]));
                for (double& v : inner.orbitals.c[i]) v /= nn;
            }
        }
        orb = std::move(inner.orbitals);
        double E = total_energy(sys, orb, mode).E_total;
        ++state.iterations;
        state.energy_history.push_back(E);
        state.max_residual = inner.max_residual;
        state.energy_delta = std::isnan(prev_E) ? std::numeric_limits<double>::infinity()
                                                : std::abs(E - prev_E);
        if (state.energy_delta < opt.outer_tol && inner.max_residual < opt.inner_tol) return true;
        prev_E = E;
    }
    return false;
}

} // namespace

ScfResult scf_solve(const HFSystem& sys, const ScfOptions& opt) {
    if (opt.mode != VeeMode::exact && opt.mode != VeeMode::rank1)
        throw ParseError("SCF supports the exact and rank1 repulsion modes");
    long N = sys.grid.size();
    if (opt.m > N) throw DimensionError("more orbitals requested than grid points");

    ScfResult res;
    ScfState& state = res.state;

    // linear core problem supplies the starting orbitals
    FockOperator core = make_core_operator(sys);
    Preconditioner P0 = build_preconditioner(opt.prec, sys, {}, opt.m);
    LinearOp core_op = [&core](const std::vector<double>& x) { return core.apply(x); };
    InnerSolve init =
        solve_orbitals(core_op, P0, OrbitalSet{}, opt.m, N, opt.inner_tol, opt.maxspace, opt.log, 0);
    state.total_inner += init.inner;
    res.orbitals = std::move(init.orbitals);
    state.energy_history.push_back(total_energy(sys, res.orbitals, opt.mode).E_total);

    if (opt.warm_start && opt.mode != VeeMode::rank1)
        fixed_point(sys, opt, VeeMode::rank1, res.orbitals, state, &state.warm_inner);

    state.converged = fixed_point(sys, opt, opt.mode, res.orbitals, state, &state.main_inner);
    res.energy = total_energy(sys, res.orbitals, opt.mode);
    return res;
}

} // namespace gridhf
