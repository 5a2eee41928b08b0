#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <sstream>

#include "gridhf/system.hpp"

namespace py = pybind11;
using namespace gridhf;

namespace {

VeeMode mode_from(const std::string& name) {
    if (name == "exact") return VeeMode::exact;
    if (name == "rank1") return VeeMode::rank1;
    if (name == "neglect_residual") return VeeMode::neglect_residual;
    if (name == "refined") return VeeMode::refined;
    throw ParseError("unknown V_ee mode '" + name + "'");
}

OrbitalSet orbitals_from(const HFSystem& sys, const py::array_t<double>& arr) {
    auto buf = arr.request();
    long N = sys.grid.size();
    OrbitalSet orb;
    if (buf.ndim == 1 && buf.shape[0] == N) {
        const double* d = static_cast<const double*>(buf.ptr);
        orb.c.emplace_back(d, d + N);
        return orb;
    }
    if (buf.ndim == 2 && buf.shape[1] == N) {
        py::array_t<double, py::array::c_style | py::array::forcecast> c(arr);
        const double* d = c.data();
        for (long i = 0; i < buf.shape[0]; ++i) orb.c.emplace_back(d + i * N, d + (i + 1) * N);
        return orb;
    }
    throw DimensionError("orbitals must have shape (m, N) with N = grid size");
}

py::array_t<double> to_array(const std::vector<std::vector<double>>& rows) {
    long m = static_cast<long>(rows.size());
    long N = rows.empty() ? 0 : static_cast<long>(rows[0].size());
    py::array_t<double> out({m, N});
    double* d = out.mutable_data();
    for (long i = 0; i < m; ++i)
        for (long j = 0; j < N; ++j) d[i * N + j] = rows[i][j];
    return out;
}

py::dict breakdown_dict(const EnergyBreakdown& e) {
    py::dict d;
    d["T_e"] = e.T_e;
    d["V_en"] = e.V_en;
    d["V_ee"] = e.V_ee;
    d["E_total"] = e.E_total;
    d["mode"] = vee_mode_name(e.mode);
    return d;
}

py::dict result_dict(const ScfResult& res) {
    py::dict d;
    d["energy"] = breakdown_dict(res.energy);
    d["orbitals"] = to_array(res.orbitals.c);
    d["eps"] = res.orbitals.eps;
    d["converged"] = res.state.converged;
    d["outer_iterations"] = res.state.iterations;
    d["inner_iterations"] = res.state.total_inner;
    d["warm_inner"] = res.state.warm_inner;
    d["main_inner"] = res.state.main_inner;
    d["energy_history"] = res.state.energy_history;
    d["energy_delta"] = res.state.energy_delta;
    d["max_residual"] = res.state.max_residual;
    return d;
}

ScfOptions options_from(int m, const std::string& mode, double inner_tol, double outer_tol,
                        int max_outer, int maxspace, bool warm_start, double mixing) {
    ScfOptions opt;
    opt.m = m;
    opt.mode = mode_from(mode);
    opt.inner_tol = inner_tol;
    opt.outer_tol = outer_tol;
    opt.max_outer = max_outer;
    opt.maxspace = maxspace;
    opt.warm_start = warm_start;
    opt.mixing = mixing;
    return opt;
}

} // namespace

PYBIND11_MODULE(_core, mod) {
    mod.doc() = "structured-matrix Hartree-Fock solver on regular grids";

    py::register_exception<Error>(mod, "GridhfError");

    py::class_<HFSystem, std::shared_ptr<HFSystem>>(mod, "System")
        .def_property_readonly("n",
                               [](const HFSystem& s) {
                                   return py::make_tuple(s.grid.n[0], s.grid.n[1], s.grid.n[2]);
                               })
        .def_property_readonly("size", [](const HFSystem& s) { return s.grid.size(); })
        .def_property_readonly("h", [](const HFSystem& s) { return s.grid.h; })
        .def_property_readonly("p", [](const HFSystem& s) { return s.grid.p; })
        .def_property_readonly("rank1_fit",
                               [](const HFSystem& s) {
                                   py::dict d;
                                   d["alpha"] = s.r1.alpha;
                                   d["beta"] = s.r1.beta;
                                   d["residual_ratio"] = s.r1.residual_ratio;
                                   return d;
                               })
        .def("__repr__", [](const HFSystem& s) {
            std::ostringstream os;
            os << "<gridhf.System " << s.grid.n[0] << "x" << s.grid.n[1] << "x" << s.grid.n[2]
               << " h=" << s.grid.h << " p=" << s.grid.p << " nuclei="
               << s.nuclei.entries.size() << ">";
            return os.str();
        });

    mod.def(
        "assemble",
        [](std::array<int, 3> n, double h, int p,
           const std::vector<std::pair<double, std::array<int, 3>>>& nuclei, double eta) {
            GridSpec g = build_uniform_grid(n[0], n[1], n[2], h, p, Boundary::periodic);
            NucleusList list;
            for (const auto& [q, cell] : nuclei)
                list.entries.push_back({q, {cell[0], cell[1], cell[2]}});
            return std::make_shared<HFSystem>(assemble_system(g, BasisFamily::make(p), list, eta));
        },
        py::arg("n"), py::arg("h"), py::arg("p"), py::arg("nuclei"), py::arg("eta") = 1e-8,
        "Build the discretized system: integral tables, stencils and the rank-1 repulsion fit.");

    mod.def(
        "total_energy",
        [](const std::shared_ptr<HFSystem>& sys, const py::array_t<double>& orbitals,
           const std::string& mode) {
            return breakdown_dict(total_energy(*sys, orbitals_from(*sys, orbitals),
                                               mode_from(mode)));
        },
        py::arg("system"), py::arg("orbitals"), py::arg("mode") = "exact");

    mod.def(
        "gradient",
        [](const std::shared_ptr<HFSystem>& sys, const py::array_t<double>& orbitals,
           const std::string& mode) {
            return to_array(gradient(*sys, orbitals_from(*sys, orbitals), mode_from(mode)));
        },
        py::arg("system"), py::arg("orbitals"), py::arg("mode") = "exact");

    mod.def(
        "scf",
        [](const std::shared_ptr<HFSystem>& sys, int m, const std::string& mode,
           double inner_tol, double outer_tol, int max_outer, int maxspace, bool warm_start,
           double mixing) {
            ScfOptions opt = options_from(m, mode, inner_tol, outer_tol, max_outer, maxspace,
                                          warm_start, mixing);
            return result_dict(scf_solve(*sys, opt));
        },
        py::arg("system"), py::arg("m") = 1, py::arg("mode") = "exact",
        py::arg("inner_tol") = 1e-8, py::arg("outer_tol") = 1e-8, py::arg("max_outer") = 100,
        py::arg("maxspace") = 30, py::arg("warm_start") = false, py::arg("mixing") = 0.0,
        "Kantorovich SCF with the preconditioned Davidson inner solver.");

    mod.def(
        "scf_tensor",
        [](const std::shared_ptr<HFSystem>& sys, int m, const std::string& mode,
           double tensor_tol, int rank_max, double inner_tol, double outer_tol, int max_outer,
           int maxspace) {
            ScfOptions opt =
                options_from(m, mode, inner_tol, outer_tol, max_outer, maxspace, false, 0.0);
            std::vector<int> ranks;
            ScfResult res = scf_solve_tensor(*sys, opt, tensor_tol, rank_max, &ranks);
            py::dict d = result_dict(res);
            d["ranks"] = ranks;
            return d;
        },
        py::arg("system"), py::arg("m") = 1, py::arg("mode") = "exact",
        py::arg("tensor_tol") = 1e-8, py::arg("rank_max") = 16, py::arg("inner_tol") = 1e-8,
        py::arg("outer_tol") = 1e-8, py::arg("max_outer") = 100, py::arg("maxspace") = 30,
        "SCF with orbitals compressed to canonical tensor format between outer steps.");

    mod.def(
        "compress",
        [](const py::array_t<double>& x, double tol, int rank_max) {
            auto buf = x.request();
            if (buf.ndim != 3) throw DimensionError("compress expects a 3-D array");
            std::array<int, 3> dims = {static_cast<int>(buf.shape[0]),
                                       static_cast<int>(buf.shape[1]),
                                       static_cast<int>(buf.shape[2])};
            py::array_t<double, py::array::c_style | py::array::forcecast> c(x);
            std::vector<double> data(c.data(), c.data() + c.size());
            CompressResult r = compress(CanonicalTensor::from_dense(dims, data), tol, rank_max);
            std::vector<double> dense = r.tensor.densify();
            py::array_t<double> out({dims[0], dims[1], dims[2]});
            std::copy(dense.begin(), dense.end(), out.mutable_data());
            py::dict d;
            d["tensor"] = out;
            d["rank"] = r.tensor.rank();
            d["weights"] = r.tensor.weights;
            d["rel_error"] = r.rel_error;
            d["achieved"] = r.achieved;
            return d;
        },
        py::arg("x"), py::arg("tol"), py::arg("rank_max"),
        "Canonical low-rank fit of a 3-D array by alternating least squares.");

    mod.def(
        "norm_ratios",
        [](const std::shared_ptr<HFSystem>& sys) {
            NormRatioPoint r = norm_ratio_diagnostics(*sys);
            py::dict d;
            d["N"] = r.N;
            d["fro_en"] = r.fro_en;
            d["fro_ee"] = r.fro_ee;
            d["spec_en"] = r.spec_en;
            d["spec_ee"] = r.spec_ee;
            return d;
        },
        py::arg("system"));
}
