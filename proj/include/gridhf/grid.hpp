#pragma once
#include <array>
#include <cstdint>
#include <map>
#include <vector>

#include "errors.hpp"
#include "piecewise.hpp"

namespace gridhf {

enum class Boundary { periodic, zero };

// Remainder of a-b modulo n, always in [0, n).
inline int mod_offset(long a, long b, int n) {
    if (n <= 0) throw InvalidGridError("mod_offset: modulus must be positive");
    long r = (a - b) % n;
    return static_cast<int>(r < 0 ? r + n : r);
}

struct GridSpec {
    int n[3] = {0, 0, 0};
    double h = 0.0;
    int p = 0;            // basis smoothness degree, 0 or 1
    Boundary boundary = Boundary::periodic;

    long size() const { return static_cast<long>(n[0]) * n[1] * n[2]; }
    long flatten(int i, int j, int k) const {
        return (static_cast<long>(i) * n[1] + j) * n[2] + k;
    }
    std::array<int, 3> unflatten(long idx) const {
        int k = static_cast<int>(idx % n[2]);
        long ij = idx / n[2];
        return {static_cast<int>(ij / n[1]), static_cast<int>(ij % n[1]), k};
    }
    long wrap(int i, int j, int k) const {
        return flatten(mod_offset(i, 0, n[0]), mod_offset(j, 0, n[1]), mod_offset(k, 0, n[2]));
    }
    // Signed representative of an offset in [-n/2, n/2).
    int min_image(int d, int axis) const {
        int m = mod_offset(d, 0, n[axis]);
        return (m >= (n[axis] + 1) / 2) ? m - n[axis] : m;
    }
};

GridSpec build_uniform_grid(int n_i, int n_j, int n_k, double h, int p, Boundary boundary);

enum class BasisMode { general, orthonormalized };

// Tensor-product basis family on the unit-spacing reference grid. degree 0 is
// the cell indicator on [-1/2, 1/2]; degree 1 the hat on [-1, 1].
struct BasisFamily {
    int degree = 0;
    BasisMode mode = BasisMode::general;
    Piecewise1D factor;  // 1-D factor in unit-spacing coordinates, centered at 0

    static BasisFamily make(int degree, BasisMode mode = BasisMode::general);
};

struct Nucleus {
    double charge = 0.0;
    int cell[3] = {0, 0, 0};
};

struct NucleusList {
    std::vector<Nucleus> entries;
    void validate(const GridSpec& g) const;
};

struct NonUniformGrid {
    std::array<std::vector<double>, 3> breakpoints;       // per-axis cell edges
    std::array<std::map<int, int>, 3> anchors;            // nucleus index -> cell index per axis
    double h_target = 0.0;
};

NonUniformGrid build_centered_tensor_grid(const std::vector<std::array<double, 3>>& nuclei,
                                          double h_target);

} // namespace gridhf
