#pragma once
#include <array>
#include <string>
#include <vector>

#include "eigensolver.hpp"

namespace gridhf {

// Canonical (CP) rank-R tensor: sum_r w_r u_r (x) v_r (x) t_r with unit-norm
// factor columns and nonincreasing nonnegative weights. Factor matrices are
// column-major: column r of axis ax lives at factors[ax][r * dims[ax] + i].
struct CanonicalTensor {
    std::array<int, 3> dims{0, 0, 0};
    std::vector<double> weights;
    std::array<std::vector<double>, 3> factors;

    int rank() const { return static_cast<int>(weights.size()); }
    long size() const { return static_cast<long>(dims[0]) * dims[1] * dims[2]; }
    std::vector<double> densify() const;
    // restore unit columns / sorted nonnegative weights after raw edits
    void normalize();

    static CanonicalTensor zero(const std::array<int, 3>& dims);
    // exact canonical form of a dense array (rank <= dims[0] * dims[1])
    static CanonicalTensor from_dense(const std::array<int, 3>& dims,
                                      const std::vector<double>& data);
};

// inner product and norms evaluated through factor Gram matrices, O(R^2 n)
double tensor_dot(const CanonicalTensor& a, const CanonicalTensor& b);
double tensor_norm(const CanonicalTensor& a);

// Sum of tensor products of 1-D matrices (each dims[ax] x dims[ax], row-major).
struct TensorOperator {
    std::array<int, 3> dims{0, 0, 0};
    struct Term {
        double coeff = 1.0;
        std::array<std::vector<double>, 3> M;
    };
    std::vector<Term> terms;

    int rank() const { return static_cast<int>(terms.size()); }
    std::vector<double> densify() const;  // full N x N matrix, row-major
};

// Exact tensor-format matvec: output rank = rank(op) * rank(x), each term
// costing one n x n matrix-vector product per axis.
CanonicalTensor tensor_matvec(const TensorOperator& op, const CanonicalTensor& x);

// Best-effort CP rank reduction by alternating least squares with rank
// escalation and deterministic random restarts.
struct CompressResult {
    CanonicalTensor tensor;
    double rel_error = 0.0;  // against the input, from Gram matrices
    bool achieved = false;   // rel_error <= tol
};
CompressResult compress(const CanonicalTensor& x, double tol, int R_max, unsigned seed = 1);

enum class OperatorKind { kinetic_A, coulomb_T, nuclear_B };

struct DecomposeResult {
    TensorOperator op;
    double rel_error = 0.0;
    bool achieved = true;
};

// kinetic_A: the exact 3-term Kronecker sum of the kinetic stencil;
// coulomb_T: CP fit of the self-pair circulant generator, one circulant
// factor per axis; nuclear_B: per-band CP fit of the attraction profiles.
DecomposeResult decompose_operator(OperatorKind kind, const HFSystem& sys, double tol,
                                   int R_max = 6);

// Tensor orbital checkpoint ("HFCT"): dims, then per orbital the rank,
// weights and factor matrices, little-endian f64.
bool save_tensor_checkpoint(const std::string& path, const std::vector<CanonicalTensor>& orbitals);
bool load_tensor_checkpoint(const std::string& path, std::vector<CanonicalTensor>& orbitals);

// SCF outer loop with orbitals held in canonical format between iterations:
// each outer step compresses the new iterate to (tol, R_max) and proceeds
// from the compressed representation. Observed ranks land in `ranks`.
ScfResult scf_solve_tensor(const HFSystem& sys, const ScfOptions& opt, double tensor_tol,
                           int R_max, std::vector<int>* ranks = nullptr);

} // namespace gridhf
