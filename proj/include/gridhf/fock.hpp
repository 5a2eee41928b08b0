#pragma once
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "structured.hpp"

namespace gridhf {

// Closed-shell electron-pair orbitals: m coefficient vectors of length N.
struct OrbitalSet {
    std::vector<std::vector<double>> c;
    std::vector<double> eps;  // eigenvalue estimates; empty means zeros

    int m() const { return static_cast<int>(c.size()); }
    long n() const { return c.empty() ? 0 : static_cast<long>(c[0].size()); }
};

enum class VeeMode { exact, rank1, neglect_residual, refined };
const char* vee_mode_name(VeeMode m);

struct EnergyBreakdown {
    double T_e = 0.0;
    double V_en = 0.0;
    double V_ee = 0.0;
    double E_total = 0.0;
    VeeMode mode = VeeMode::exact;
    std::string report() const;  // line-oriented: term name, value, mode
};

// alpha I + beta u u^T fit of the repulsion circulant.
struct Rank1Repulsion {
    double alpha = 0.0;
    double beta = 0.0;
    double residual_ratio = 0.0;
};

enum class FitNorm { frobenius, spectral };

Rank1Repulsion fit_rank1_repulsion(const ThreeLevelCirculant& T, FitNorm norm);

// Self-pair interaction circulant t(0, ., 0); exploits per-axis evenness of
// the reduced factor so only one octant of separations is integrated.
ThreeLevelCirculant build_pair_circulant(const GridSpec& grid, const BasisFamily& basis,
                                         double eta);

// Assembled discretization of one physical system.
struct HFSystem {
    GridSpec grid;
    BasisFamily basis;
    NucleusList nuclei;
    StencilTable S, A;
    NuclearTable W;
    FourCenterTable T4;
    Rank1Repulsion r1;  // fitted from the (0,0) block of T4

    mutable std::map<int, ThreeLevelCirculant> fine_tables;  // refined-mode cache, by K
    double eta = 1e-8;

    std::vector<double> apply_A(const std::vector<double>& x) const;
    std::vector<double> apply_Bv(const std::vector<double>& x) const;
    const ThreeLevelCirculant& pair_circulant() const;       // (0,0) block of T4
    const ThreeLevelCirculant& fine_pair_circulant(int K) const;

  private:
    mutable ThreeLevelCirculant pair_circ_;
    mutable bool pair_circ_ready_ = false;
};

HFSystem assemble_system(const GridSpec& grid, const BasisFamily& basis,
                         const NucleusList& nuclei, double eta);

// Electron repulsion kernel of Eq. (4.2.1.2): the four-center block operator
// or its alpha I + beta u u^T surrogate (both applied symmetrically).
struct RepulsionKernel {
    const FourCenterOperator* four_center = nullptr;
    double alpha = 0.0, beta = 0.0;
    bool rank1 = false;

    PairBlockVector apply(const PairBlockVector& g) const;
};

double kinetic_energy(const HFSystem& sys, const OrbitalSet& orb);
double nuclear_energy(const HFSystem& sys, const OrbitalSet& orb);
double electron_energy(const HFSystem& sys, const OrbitalSet& orb, VeeMode mode, int K = 2);
EnergyBreakdown total_energy(const HFSystem& sys, const OrbitalSet& orb, VeeMode mode, int K = 2);

// dE_i of Eq. (4.2.2.1); eps taken from orb.eps (zeros when empty).
std::vector<std::vector<double>> gradient(const HFSystem& sys, const OrbitalSet& orb,
                                          VeeMode mode);

// Block Hessian action of the p=0 second-derivative formulas.
std::vector<std::vector<double>> hessian_matvec_p0(const HFSystem& sys, const OrbitalSet& orb,
                                                   const std::vector<std::vector<double>>& x,
                                                   VeeMode mode);

// Linearized Fock operator F(prev) = (2/h^2)A - (4/h)B + (4/h)(2J - K),
// with J/K built from the previous iterate's orbitals.
struct FockOperator {
    const HFSystem* sys = nullptr;
    VeeMode mode = VeeMode::exact;
    std::vector<std::vector<double>> orbitals;  // previous iterate
    PairBlockVector w;                          // kernel-applied total pair density
    std::shared_ptr<FourCenterOperator> fc;     // persistent spectra for the exact kernel
    bool has_vee = false;

    RepulsionKernel kernel() const;
    std::vector<double> apply(const std::vector<double>& x) const;
};

FockOperator make_fock_operator(const HFSystem& sys, const OrbitalSet& prev, VeeMode mode);
// Linear part only: (2/h^2)A - (4/h)B (the SCF initial operator).
FockOperator make_core_operator(const HFSystem& sys);

// Complement reformulation on a dense two-electron tensor oracle:
// E = 2 sum H_pq P_pq + sum G_pqrs P_pq P_rs with P from the leading m frame
// vectors, recomputed through the trailing N-m complement per Eqs.
// (4.2.4.1)-(4.2.4.2).
double direct_energy_dense(const std::vector<std::vector<double>>& H,
                           const std::vector<double>& G,  // flattened [p][q][r][s]
                           const std::vector<std::vector<double>>& frame, int m);
double complement_energy(const std::vector<std::vector<double>>& H, const std::vector<double>& G,
                         const std::vector<std::vector<double>>& frame, int m);

// Nodal projection of a coefficient-vector product onto the grid basis.
struct ProductProjection {
    std::vector<double> xi;
    double node_residual = 0.0;  // max |psi*phi - xi| over grid nodes
    double cell_residual = 0.0;  // max |psi*phi - xi| sampled inside cells
};
ProductProjection project_product_to_grid(const std::vector<double>& a,
                                          const std::vector<double>& b, const GridSpec& grid,
                                          const BasisFamily& basis);

// Frobenius/spectral norm ratios of Eqs. (5.1)-(5.3) for one grid size. The
// repulsion entry is the mean-field operator of a unit nodal pair density
// (the exact p=0 single-pair ground-state shape), not the bare interaction
// kernel, whose norm collects all N columns and overstates V_ee.
struct NormRatioPoint {
    int n = 0;
    long N = 0;
    double fro_en = 0.0;   // ||T_e||_F^2 / ||V_en||_F^2
    double fro_ee = 0.0;   // ||T_e||_F^2 / ||V_ee||_F^2
    double spec_en = 0.0;  // ||T_e||_2 / ||V_en||_2
    double spec_ee = 0.0;  // ||T_e||_2 / ||V_ee||_2
};
NormRatioPoint norm_ratio_diagnostics(const HFSystem& sys);

} // namespace gridhf
