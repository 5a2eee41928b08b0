#include "gridhf/system.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "gridhf/errors.hpp"

namespace gridhf {

namespace {

const std::map<std::string, double>& element_table() {
    static const std::map<std::string, double> t = {
        {"H", 1},  {"He", 2}, {"Li", 3}, {"Be", 4}, {"B", 5},   {"C", 6},
        {"N", 7},  {"O", 8},  {"F", 9},  {"Ne", 10}, {"Na", 11}, {"Mg", 12},
        {"Al", 13}, {"Si", 14}, {"P", 15}, {"S", 16}, {"Cl", 17}, {"Ar", 18}};
    return t;
}

std::vector<std::string> tokens(const std::string& line) {
    std::istringstream is(line.substr(0, line.find('#')));
    std::vector<std::string> out;
    std::string t;
    while (is >> t) out.push_back(t);
    return out;
}

double to_number(const std::string& s, const std::string& where) {
    size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos != s.size()) throw ParseError(where + ": expected a number, got '" + s + "'");
    return v;
}

long to_integer(const std::string& s, const std::string& where) {
    double v = to_number(s, where);
    if (v != std::floor(v)) throw ParseError(where + ": expected an integer, got '" + s + "'");
    return static_cast<long>(v);
}

bool to_flag(const std::string& s, const std::string& where) {
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw ParseError(where + ": expected true/false, got '" + s + "'");
}

} // namespace

double element_charge(const std::string& symbol) {
    const auto& table = element_table();
    auto it = table.find(symbol);
    if (it != table.end()) return it->second;
    std::string known;
    for (const auto& [sym, q] : table) known += (known.empty() ? "" : " ") + sym;
    throw ParseError("unknown element '" + symbol + "'; known symbols: " + known +
                     " (use an explicit charge for anything heavier)");
}

SystemFile parse_system_text(std::istream& in, const std::string& label) {
    SystemFile sf;
    bool m_seen = false;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::vector<std::string> tok = tokens(line);
        if (tok.empty()) continue;
        std::string where = label + ":" + std::to_string(lineno);
        if (tok[0] == "units") {
            if (tok.size() != 2 || (tok[1] != "au" && tok[1] != "angstrom"))
                throw ParseError(where + ": units must be 'au' or 'angstrom'");
            sf.units = tok[1];
        } else if (tok[0] == "m") {
            if (tok.size() != 2) throw ParseError(where + ": expected 'm <count>'");
            sf.m = static_cast<int>(to_integer(tok[1], where));
            if (sf.m < 1) throw ParseError(where + ": electron-pair count must be >= 1");
            m_seen = true;
        } else if (tok[0] == "box") {
            if (tok.size() != 4) throw ParseError(where + ": expected 'box <ni> <nj> <nk>'");
            for (int ax = 0; ax < 3; ++ax) {
                sf.box[ax] = static_cast<int>(to_integer(tok[1 + ax], where));
                if (sf.box[ax] < 2) throw ParseError(where + ": box extent must be >= 2");
            }
            sf.has_box = true;
        } else {
            if (tok.size() != 4)
                throw ParseError(where + ": expected '<element-or-charge> <x> <y> <z>'");
            NucleusSite site;
            if (std::isdigit(static_cast<unsigned char>(tok[0][0])) || tok[0][0] == '.')
                site.charge = to_number(tok[0], where);
            else
                try {
                    site.charge = element_charge(tok[0]);
                } catch (const ParseError& e) {
                    throw ParseError(where + ": " + e.what());
                }
            if (site.charge <= 0.0) throw ParseError(where + ": nuclear charge must be positive");
            for (int ax = 0; ax < 3; ++ax) {
                site.r[ax] = to_number(tok[1 + ax], where);
                if (!std::isfinite(site.r[ax]))
                    throw ParseError(where + ": coordinate is not finite");
            }
            sf.sites.push_back(site);
        }
    }
    if (sf.sites.empty()) throw ParseError(label + ": no nuclei defined");
    if (!m_seen) throw ParseError(label + ": electron-pair count 'm' missing");
    if (sf.units == "angstrom")
        for (NucleusSite& s : sf.sites)
            for (double& x : s.r) x *= angstrom_per_bohr_inv;
    return sf;
}

SystemFile parse_system(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open system file '" + path + "'");
    return parse_system_text(f, path);
}

void RunConfig::validate() const {
    if (inner_tol <= 0.0 || outer_tol <= 0.0 || tensor_tol <= 0.0 || eta <= 0.0)
        throw ParseError("all tolerances must be positive");
    if (max_outer < 1 || maxspace < 2 || rank_max < 1 || threads < 1)
        throw ParseError("iteration limits must be positive (maxspace >= 2)");
    if (p != 0 && p != 1) throw ParseError("basis degree p must be 0 or 1");
    for (int ax = 0; ax < 3; ++ax)
        if (n[ax] < 2) throw ParseError("grid extent must be >= 2 per axis");
    if (h <= 0.0) throw ParseError("grid step h must be positive");
    if (mode != VeeMode::exact && mode != VeeMode::rank1)
        throw ParseError("SCF runs need the exact or rank1 repulsion mode");
    if (storage == StorageMode::tensor && mode != VeeMode::exact && mode != VeeMode::rank1)
        throw ParseError("tensor storage requires a tensor-capable repulsion mode");
    if (mixing < 0.0 || mixing >= 1.0) throw ParseError("mixing must lie in [0, 1)");
}

RunConfig parse_config_text(std::istream& in, const std::string& label) {
    RunConfig cfg;
    std::string section, line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string body = line.substr(0, line.find('#'));
        std::string where = label + ":" + std::to_string(lineno);
        std::istringstream is(body);
        std::string first;
        if (!(is >> first)) continue;
        if (first.front() == '[') {
            if (first.back() != ']') throw ParseError(where + ": malformed section header");
            section = first.substr(1, first.size() - 2);
            continue;
        }
        size_t eq = body.find('=');
        if (eq == std::string::npos) throw ParseError(where + ": expected 'key = value'");
        std::vector<std::string> key_tok = tokens(body.substr(0, eq));
        std::vector<std::string> val = tokens(body.substr(eq + 1));
        if (key_tok.size() != 1 || val.empty())
            throw ParseError(where + ": expected 'key = value'");
        const std::string& key = key_tok[0];
        std::string full = section + "." + key;
        auto one = [&]() -> const std::string& {
            if (val.size() != 1) throw ParseError(where + ": '" + full + "' takes one value");
            return val[0];
        };
        if (full == "system.file")
            cfg.system_path = one();
        else if (full == "grid.n") {
            if (val.size() == 1)
                cfg.n[0] = cfg.n[1] = cfg.n[2] = static_cast<int>(to_integer(val[0], where));
            else if (val.size() == 3)
                for (int ax = 0; ax < 3; ++ax)
                    cfg.n[ax] = static_cast<int>(to_integer(val[ax], where));
            else
                throw ParseError(where + ": 'grid.n' takes one or three extents");
        } else if (full == "grid.h")
            cfg.h = to_number(one(), where);
        else if (full == "grid.p")
            cfg.p = static_cast<int>(to_integer(one(), where));
        else if (full == "grid.boundary") {
            const std::string& b = one();
            if (b == "periodic")
                cfg.boundary = Boundary::periodic;
            else if (b == "zero")
                cfg.boundary = Boundary::zero;
            else
                throw ParseError(where + ": boundary must be 'periodic' or 'zero'");
        } else if (full == "grid.eta")
            cfg.eta = to_number(one(), where);
        else if (full == "scf.mode") {
            const std::string& m = one();
            if (m == "exact")
                cfg.mode = VeeMode::exact;
            else if (m == "rank1")
                cfg.mode = VeeMode::rank1;
            else
                throw ParseError(where + ": scf.mode must be 'exact' or 'rank1'");
        } else if (full == "scf.inner_tol")
            cfg.inner_tol = to_number(one(), where);
        else if (full == "scf.outer_tol")
            cfg.outer_tol = to_number(one(), where);
        else if (full == "scf.max_outer")
            cfg.max_outer = static_cast<int>(to_integer(one(), where));
        else if (full == "scf.maxspace")
            cfg.maxspace = static_cast<int>(to_integer(one(), where));
        else if (full == "scf.warm_start")
            cfg.warm_start = to_flag(one(), where);
        else if (full == "scf.mixing")
            cfg.mixing = to_number(one(), where);
        else if (full == "scf.preconditioner") {
            const std::string& k = one();
            if (k == "circulant_fit")
                cfg.prec = Preconditioner::Kind::circulant_fit;
            else if (k == "kinetic_inverse")
                cfg.prec = Preconditioner::Kind::kinetic_inverse;
            else
                throw ParseError(where +
                                 ": preconditioner must be 'circulant_fit' or 'kinetic_inverse'");
        } else if (full == "storage.mode") {
            const std::string& m = one();
            if (m == "dense")
                cfg.storage = StorageMode::dense;
            else if (m == "tensor")
                cfg.storage = StorageMode::tensor;
            else
                throw ParseError(where + ": storage.mode must be 'dense' or 'tensor'");
        } else if (full == "storage.tensor_tol")
            cfg.tensor_tol = to_number(one(), where);
        else if (full == "storage.rank_max")
            cfg.rank_max = static_cast<int>(to_integer(one(), where));
        else if (full == "tables.cache")
            cfg.cache_dir = one();
        else if (full == "output.dir")
            cfg.out_dir = one();
        else if (full == "run.deterministic")
            cfg.deterministic = to_flag(one(), where);
        else if (full == "run.threads")
            cfg.threads = static_cast<int>(to_integer(one(), where));
        else
            throw ParseError(where + ": unknown key '" + full + "'");
    }
    cfg.validate();
    return cfg;
}

RunConfig parse_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open config file '" + path + "'");
    return parse_config_text(f, path);
}

std::string render_config(const RunConfig& cfg) {
    std::ostringstream os;
    os.precision(17);
    os << "[system]\nfile = " << cfg.system_path << "\n\n";
    os << "[grid]\nn = " << cfg.n[0] << " " << cfg.n[1] << " " << cfg.n[2] << "\nh = " << cfg.h
       << "\np = " << cfg.p
       << "\nboundary = " << (cfg.boundary == Boundary::periodic ? "periodic" : "zero")
       << "\neta = " << cfg.eta << "\n\n";
    os << "[scf]\nmode = " << vee_mode_name(cfg.mode) << "\ninner_tol = " << cfg.inner_tol
       << "\nouter_tol = " << cfg.outer_tol << "\nmax_outer = " << cfg.max_outer
       << "\nmaxspace = " << cfg.maxspace
       << "\nwarm_start = " << (cfg.warm_start ? "true" : "false")
       << "\nmixing = " << cfg.mixing << "\npreconditioner = "
       << (cfg.prec == Preconditioner::Kind::circulant_fit ? "circulant_fit" : "kinetic_inverse")
       << "\n\n";
    os << "[storage]\nmode = " << (cfg.storage == StorageMode::dense ? "dense" : "tensor")
       << "\ntensor_tol = " << cfg.tensor_tol << "\nrank_max = " << cfg.rank_max << "\n\n";
    os << "[tables]\ncache = " << cache_directory(cfg) << "\n\n";
    os << "[output]\ndir = " << cfg.out_dir << "\n\n";
    os << "[run]\ndeterministic = " << (cfg.deterministic ? "true" : "false")
       << "\nthreads = " << cfg.threads << "\n";
    return os.str();
}

std::string cache_directory(const RunConfig& cfg) {
    if (!cfg.cache_dir.empty()) return cfg.cache_dir;
    if (const char* env = std::getenv("HF_CACHE_DIR"); env && *env) return env;
    return ".gridhf_cache";
}

namespace {

GridSpec grid_from(const RunConfig& cfg, const SystemFile& sf) {
    std::array<int, 3> n = sf.has_box ? sf.box : cfg.n;
    return build_uniform_grid(n[0], n[1], n[2], cfg.h, cfg.p, cfg.boundary);
}

NucleusList snap_nuclei(const SystemFile& sf, const GridSpec& g) {
    NucleusList out;
    for (const NucleusSite& s : sf.sites) {
        Nucleus n;
        n.charge = s.charge;
        for (int ax = 0; ax < 3; ++ax) {
            long c = std::lround(s.r[ax] / g.h);
            n.cell[ax] = static_cast<int>(((c % g.n[ax]) + g.n[ax]) % g.n[ax]);
        }
        out.entries.push_back(n);
    }
    return out;
}

std::string table_path(const RunConfig& cfg, const GridSpec& g, const BasisFamily& basis) {
    std::ostringstream os;
    os << cache_directory(cfg) << "/tables_" << std::hex << basis_descriptor_hash(g, basis)
       << ".hfit";
    return os.str();
}

} // namespace

HFSystem load_system(const RunConfig& cfg, const SystemFile& sf, std::ostream& notice) {
    GridSpec g = grid_from(cfg, sf);
    BasisFamily basis = BasisFamily::make(cfg.p);
    NucleusList nuclei = snap_nuclei(sf, g);
    std::string path = table_path(cfg, g, basis);

    HFSystem sys;
    sys.grid = g;
    sys.basis = basis;
    sys.nuclei = nuclei;
    sys.eta = cfg.eta;
    if (load_tables(path, g, basis, sys.S, sys.A, sys.W, sys.T4)) {
        notice << "tables: loaded " << path << "\n";
        sys.r1 = fit_rank1_repulsion(sys.pair_circulant(), FitNorm::frobenius);
        return sys;
    }
    notice << "tables: building " << path << " (no usable cache entry)\n";
    sys = assemble_system(g, basis, nuclei, cfg.eta);
    std::filesystem::create_directories(cache_directory(cfg));
    save_tables(path, g, basis, sys.S, sys.A, sys.W, sys.T4);
    return sys;
}

int tables_command(const std::string& config_path, std::ostream& out) {
    try {
        RunConfig cfg = parse_config(config_path);
        SystemFile sf = parse_system(cfg.system_path);
        HFSystem sys = load_system(cfg, sf, out);
        out << "stencil entries: S " << sys.S.entries.size() << ", A " << sys.A.entries.size()
            << "; nuclear bands " << sys.W.w.size() << "; four-center classes "
            << sys.T4.t.size() << "\n";
        return 0;
    } catch (const Error& e) {
        out << "error: " << e.what() << "\n";
        return 1;
    }
}

namespace {

std::string join_ranks(const std::vector<int>& ranks) {
    std::string s;
    for (size_t i = 0; i < ranks.size(); ++i)
        s += (i ? "," : "") + std::to_string(ranks[i]);
    return s;
}

} // namespace

int scf_command(const std::string& config_path, std::ostream& out) {
    try {
        RunConfig cfg = parse_config(config_path);
        SystemFile sf = parse_system(cfg.system_path);

        std::filesystem::create_directories(cfg.out_dir);
        {
            std::ofstream rc(cfg.out_dir + "/resolved.cfg");
            rc << render_config(cfg);
        }

        HFSystem sys = load_system(cfg, sf, out);

        ScfOptions opt;
        opt.m = sf.m;
        opt.inner_tol = cfg.inner_tol;
        opt.outer_tol = cfg.outer_tol;
        opt.max_outer = cfg.max_outer;
        opt.maxspace = cfg.maxspace;
        opt.warm_start = cfg.warm_start;
        opt.mixing = cfg.mixing;
        opt.mode = cfg.mode;
        opt.prec = cfg.prec;
        std::ofstream log(cfg.out_dir + "/scf_log.tsv");
        opt.log = &log;

        auto t0 = std::chrono::steady_clock::now();
        ScfResult res;
        std::vector<int> ranks;
        if (cfg.storage == StorageMode::tensor)
            res = scf_solve_tensor(sys, opt, cfg.tensor_tol, cfg.rank_max, &ranks);
        else
            res = scf_solve(sys, opt);
        double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

        {
            std::ofstream er(cfg.out_dir + "/energy.txt");
            er << res.energy.report();
        }
        {
            std::array<int, 3> dims = {sys.grid.n[0], sys.grid.n[1], sys.grid.n[2]};
            std::vector<CanonicalTensor> orbs;
            for (const auto& c : res.orbitals.c)
                orbs.push_back(CanonicalTensor::from_dense(dims, c));
            if (!save_tensor_checkpoint(cfg.out_dir + "/orbitals.hfct", orbs))
                throw IoError("cannot write '" + cfg.out_dir + "/orbitals.hfct'");
        }
        {
            std::ofstream rs(cfg.out_dir + "/run.txt");
            rs.precision(17);
            rs << "system = " << cfg.system_path << "\n"
               << "grid = " << sys.grid.n[0] << "x" << sys.grid.n[1] << "x" << sys.grid.n[2]
               << "\nh = " << sys.grid.h << "\np = " << sys.grid.p << "\nm = " << sf.m
               << "\nstorage = " << (cfg.storage == StorageMode::dense ? "dense" : "tensor")
               << "\nvee_mode = " << vee_mode_name(cfg.mode) << "\nranks = " << join_ranks(ranks)
               << "\nouter = " << res.state.iterations
               << "\ninner = " << res.state.total_inner << "\nwall = " << wall
               << "\npeak_vectors = " << cfg.maxspace + sf.m
               << "\nconverged = " << (res.state.converged ? 1 : 0)
               << "\nE_total = " << res.energy.E_total << "\n";
        }
        out << res.energy.report();
        out << (res.state.converged ? "converged" : "not converged") << " after "
            << res.state.iterations << " outer / " << res.state.total_inner
            << " inner iterations\n";
        return res.state.converged ? 0 : 2;
    } catch (const Error& e) {
        out << "error: " << e.what() << "\n";
        return 1;
    }
}

int report_command(const std::vector<std::string>& run_dirs, std::ostream& out) {
    out << "L\tm\tR\tT\tM\tE\n";
    for (const std::string& dir : run_dirs) {
        std::ifstream f(dir + "/run.txt");
        if (!f) {
            out << dir << "\t-\t-\t-\t-\tmissing run.txt\n";
            continue;
        }
        std::map<std::string, std::string> kv;
        std::string line;
        while (std::getline(f, line)) {
            size_t eq = line.find('=');
            if (eq == std::string::npos) continue;
            std::vector<std::string> k = tokens(line.substr(0, eq));
            std::vector<std::string> v = tokens(line.substr(eq + 1));
            if (k.size() == 1) kv[k[0]] = v.empty() ? "" : v[0];
        }
        if (!kv.count("grid") || !kv.count("m") || !kv.count("E_total")) {
            out << dir << "\t-\t-\t-\t-\tcorrupted run.txt\n";
            continue;
        }
        out << kv["grid"] << "\t" << kv["m"] << "\t"
            << (kv["storage"] == "tensor" ? kv["ranks"] : std::string()) << "\t" << kv["wall"]
            << "\t" << kv["peak_vectors"] << "\t" << kv["E_total"] << "\n";
    }
    return 0;
}

int selfcheck_command(std::ostream& out) {
    int failures = 0;
    auto check = [&](const char* name, bool ok) {
        out << (ok ? "ok   " : "FAIL ") << name << "\n";
        if (!ok) ++failures;
    };
    try {
        GridSpec g = build_uniform_grid(4, 3, 5, 0.8, 1, Boundary::periodic);
        bool round = true;
        for (long a = 0; a < g.size(); ++a) {
            auto i = g.unflatten(a);
            round = round && g.flatten(i[0], i[1], i[2]) == a;
        }
        check("grid index roundtrip", round);

        BasisFamily basis = BasisFamily::make(1);
        auto [S, A] = build_stencils(g, basis);
        check("stencil symmetry", S.symmetric() && A.symmetric());

        ThreeLevelCirculant C;
        C.dims = {2, 2, 2};
        C.generator = {3.0, 0.7, 0.5, 0.2, 0.6, 0.1, 0.3, 0.05};
        std::mt19937 rng(7);
        std::normal_distribution<double> nd;
        std::vector<double> x(8);
        for (double& v : x) v = nd(rng);
        std::vector<double> y = C.matvec(x);
        GridSpec g2 = build_uniform_grid(2, 2, 2, 1.0, 0, Boundary::periodic);
        bool circ_ok = true;
        for (long a = 0; a < 8 && circ_ok; ++a) {
            double s = 0.0;
            auto ia = g2.unflatten(a);
            for (long b = 0; b < 8; ++b) {
                auto ib = g2.unflatten(b);
                s += C.generator[g2.wrap(ia[0] - ib[0], ia[1] - ib[1], ia[2] - ib[2])] * x[b];
            }
            circ_ok = std::abs(s - y[a]) < 1e-12;
        }
        check("circulant matvec vs dense", circ_ok);

        Rank1Repulsion fit =
            fit_rank1_repulsion(ThreeLevelCirculant::delta({3, 3, 3}), FitNorm::frobenius);
        check("rank-1 fit of the identity",
              std::abs(fit.alpha - 1.0) < 1e-12 && std::abs(fit.beta) < 1e-12 &&
                  fit.residual_ratio < 1e-12);

        Preconditioner P;
        P.C = C;
        std::vector<double> psi0(8, 1.0);
        psi0[3] += 0.01;
        DavidsonResult d = davidson([&C](const std::vector<double>& v) { return C.matvec(v); },
                                    P, psi0, 1e-10, 8);
        double lam_min = 1e300;
        for (const auto& lam : C.spectrum()) lam_min = std::min(lam_min, lam.real());
        check("davidson on a circulant", std::abs(d.nu - lam_min) < 1e-8);

        GridSpec g3 = build_uniform_grid(3, 3, 3, 1.0, 0, Boundary::periodic);
        NucleusList nuc;
        nuc.entries = {{1.0, {0, 0, 0}}};
        HFSystem sys = assemble_system(g3, BasisFamily::make(0), nuc, 1e-8);
        OrbitalSet orb;
        orb.c.push_back(std::vector<double>(27, 0.0));
        orb.c[0][0] = 1.0;
        EnergyBreakdown e = total_energy(sys, orb, VeeMode::exact);
        check("energy breakdown consistency",
              std::abs(e.E_total - (e.T_e + e.V_en + e.V_ee)) < 1e-12 && e.V_en < 0.0 &&
                  e.V_ee > 0.0);
    } catch (const Error& e) {
        out << "FAIL exception: " << e.what() << "\n";
        ++failures;
    }
    out << (failures == 0 ? "selfcheck passed" : "selfcheck FAILED") << "\n";
    return failures == 0 ? 0 : 1;
}

} // namespace gridhf
