#pragma once
#include <functional>
#include <iosfwd>
#include <vector>

#include "fock.hpp"

namespace gridhf {

// Shift-invertible circulant preconditioner for the Davidson iteration.
struct Preconditioner {
    enum class Kind { kinetic_inverse, circulant_fit };

    Kind kind = Kind::circulant_fit;
    ThreeLevelCirculant C;
    double guard = 1e-12;      // spectral values closer than this are rejected
    double ratio = 0.0;        // Frobenius residual ratio of Eq. (prec)

    // (C - nu I)^{-1} r; on a guard trip the shift backs off to nu - 1e-10
    // once before failing.
    std::vector<double> solve(const std::vector<double>& r, double nu) const;
};

// Frobenius-closest circulant to T_e + V_en + (4/h) alpha diag(z)
// + (4/h) beta (2m - 1) I, or the bare kinetic circulant; either way the
// residual ratio against the full displayed operator is recorded.
Preconditioner build_preconditioner(Preconditioner::Kind kind, const HFSystem& sys,
                                    const std::vector<double>& z, int m);

struct DavidsonLogEntry {
    int restart = 0;
    int iter = 0;
    double nu = 0.0;
    double rnorm = 0.0;
    double wall = 0.0;  // seconds since the solve started
};

struct DavidsonResult {
    double nu = 0.0;
    std::vector<double> psi;
    double residual = 0.0;
    int iterations = 0;  // total operator-pair iterations across restarts
    std::vector<DavidsonLogEntry> log;
};

using LinearOp = std::function<std::vector<double>(const std::vector<double>&)>;

// Smallest eigenpair by the restarted Davidson iteration: residual check,
// preconditioned expansion, twice-repeated modified Gram-Schmidt against the
// locked set and the search basis, dense projected eigenproblem, restart at
// maxspace. Throws StagnationError when the best residual has not improved
// over 3 * maxspace consecutive iterations.
DavidsonResult davidson(const LinearOp& apply_A, const Preconditioner& P,
                        std::vector<double> psi0, double eps, int maxspace,
                        const std::vector<std::vector<double>>& locked = {});

struct ScfOptions {
    int m = 1;
    double inner_tol = 1e-8;
    double outer_tol = 1e-8;
    int max_outer = 100;
    int maxspace = 30;
    bool warm_start = false;
    double mixing = 0.0;  // linear mixing with the previous iterate, default off
    VeeMode mode = VeeMode::exact;
    Preconditioner::Kind prec = Preconditioner::Kind::circulant_fit;
    std::ostream* log = nullptr;  // tab-separated: outer, inner, nu, ||r||, wall
};

struct ScfState {
    int iterations = 0;
    long total_inner = 0;
    long warm_inner = 0;  // inner iterations spent on the rank-1 warm start
    long main_inner = 0;  // inner iterations spent in the requested mode
    std::vector<double> energy_history;
    double energy_delta = 0.0;
    double max_residual = 0.0;
    bool converged = false;
};

struct ScfResult {
    OrbitalSet orbitals;
    EnergyBreakdown energy;
    ScfState state;
};

// Kantorovich outer loop: orbitals from the linear core problem (or the
// rank-1 simplified nonlinear problem when warm_start is set), then the
// fixed-point iteration on the linearized Fock operator. Non-convergence is
// reported through state.converged, not an exception.
ScfResult scf_solve(const HFSystem& sys, const ScfOptions& opt);

} // namespace gridhf
