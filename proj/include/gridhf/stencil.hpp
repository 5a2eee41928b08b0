#pragma once
#include <map>
#include <string>
#include <vector>

#include "coulomb.hpp"
#include "grid.hpp"

namespace gridhf {

struct Offset3 {
    int d[3] = {0, 0, 0};
    bool operator<(const Offset3& o) const {
        for (int ax = 0; ax < 3; ++ax)
            if (d[ax] != o.d[ax]) return d[ax] < o.d[ax];
        return false;
    }
    bool operator==(const Offset3& o) const {
        return d[0] == o.d[0] && d[1] == o.d[1] && d[2] == o.d[2];
    }
    Offset3 operator-() const { return {{-d[0], -d[1], -d[2]}}; }
    int linf() const;
};

enum class StencilKind { overlap, kinetic, nuclear_W, four_center };

// Offset-indexed table of a translation-invariant band operator.
struct StencilTable {
    StencilKind kind = StencilKind::overlap;
    int p = 0;  // half-width bound: entries with any |d| > p are absent (zero)
    std::map<Offset3, double> entries;

    double value(const Offset3& off) const {
        auto it = entries.find(off);
        return it == entries.end() ? 0.0 : it->second;
    }
    bool symmetric(double tol = 1e-14) const;
};

// Nuclear-attraction integrals for a nucleus at the origin cell: one value per
// (band offset delta, grid position) pair. Not translation invariant in the
// position index, so each delta carries a full grid array.
struct NuclearTable {
    std::array<int, 3> dims{0, 0, 0};
    int p = 0;
    std::map<Offset3, std::vector<double>> w;  // delta -> values over positions
    long nnz(double drop_tol = 0.0) const;
};

// Four-center translation classes t(delta, separation, delta'): per ordered
// (delta, delta') window pair, values over the (wrapped) separation grid.
struct FourCenterTable {
    std::array<int, 3> dims{0, 0, 0};
    int p = 0;
    std::map<std::pair<Offset3, Offset3>, std::vector<double>> t;

    double value(const Offset3& delta, long sep_index, const Offset3& delta2) const;
    bool stored_zero(const Offset3& delta, const Offset3& delta2) const;
};

std::pair<StencilTable, StencilTable> build_stencils(const GridSpec& grid,
                                                     const BasisFamily& basis);

NuclearTable build_nuclear_W(const GridSpec& grid, const BasisFamily& basis, double eta,
                             double drop_tol = 0.0);

FourCenterTable build_four_center_table(const GridSpec& grid, const BasisFamily& basis,
                                        double eta);

// Binary "HFIT" container for the tables above, plus a text export for diffs.
void save_tables(const std::string& path, const GridSpec& grid, const BasisFamily& basis,
                 const StencilTable& S, const StencilTable& A, const NuclearTable& W,
                 const FourCenterTable& T);
bool load_tables(const std::string& path, const GridSpec& grid, const BasisFamily& basis,
                 StencilTable& S, StencilTable& A, NuclearTable& W, FourCenterTable& T);
std::string export_stencil_text(const StencilTable& s);
uint32_t basis_descriptor_hash(const GridSpec& grid, const BasisFamily& basis);

} // namespace gridhf
