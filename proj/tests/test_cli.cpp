#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "gridhf/errors.hpp"
#include "gridhf/system.hpp"

using namespace gridhf;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() : path(fs::temp_directory_path() / fs::path("gridhf_cli_test")) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name, const std::string& content) const {
        std::string p = (path / name).string();
        std::ofstream f(p);
        f << content;
        return p;
    }
    std::string sub(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
    std::ifstream f(path);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

std::string base_config(const TempDir& t, const std::string& sys_path, const std::string& extra) {
    return t.file("run.cfg", "[system]\nfile = " + sys_path +
                                 "\n[grid]\nn = 4\nh = 0.9\np = 0\neta = 1e-8\n"
                                 "[tables]\ncache = " +
                                 t.sub("cache") + "\n[output]\ndir = " + t.sub("out") + "\n" +
                                 extra);
}

} // namespace

TEST_CASE("system file parsing") {
    std::istringstream ok("units au\nm 1\nH 0 0 0\n");
    SystemFile sf = parse_system_text(ok, "mem");
    CHECK(sf.m == 1);
    REQUIRE(sf.sites.size() == 1);
    CHECK(sf.sites[0].charge == 1.0);
    CHECK(sf.sites[0].r == std::array<double, 3>{0.0, 0.0, 0.0});

    // unknown element names the line and lists the symbols
    std::istringstream bad("m 1\nXx 0 0 0\n");
    try {
        parse_system_text(bad, "mem");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        std::string msg = e.what();
        CHECK(msg.find("mem:2") != std::string::npos);
        CHECK(msg.find("Ar") != std::string::npos);
    }

    // Angstrom coordinates convert and round-trip
    std::istringstream ang("units angstrom\nm 2\nO 1.0 -0.25 2.5\n");
    SystemFile a = parse_system_text(ang, "mem");
    CHECK(a.sites[0].charge == 8.0);
    for (int ax = 0; ax < 3; ++ax) {
        double back = a.sites[0].r[ax] / angstrom_per_bohr_inv;
        double orig = ax == 0 ? 1.0 : (ax == 1 ? -0.25 : 2.5);
        CHECK(back == doctest::Approx(orig).epsilon(1e-12));
    }

    // numeric charge, box override, malformed lines
    std::istringstream num("m 1\nbox 4 6 8\n2.5 0 0 0\n");
    SystemFile n = parse_system_text(num, "mem");
    CHECK(n.sites[0].charge == 2.5);
    CHECK(n.has_box);
    CHECK(n.box == std::array<int, 3>{4, 6, 8});
    std::istringstream mal("m 1\nH 0 0\n");
    CHECK_THROWS_AS(parse_system_text(mal, "mem"), ParseError);
    std::istringstream nom("H 0 0 0\n");
    CHECK_THROWS_AS(parse_system_text(nom, "mem"), ParseError);
}

TEST_CASE("config parsing, validation and resolved round-trip") {
    std::istringstream in(
        "[system]\nfile = a.sys\n"
        "[grid]\nn = 4 6 8\nh = 1.25\np = 1\nboundary = periodic\neta = 1e-7\n"
        "[scf]\nmode = rank1\ninner_tol = 1e-9\nmax_outer = 7\nwarm_start = true\n"
        "[storage]\nmode = tensor\ntensor_tol = 1e-5\nrank_max = 4\n"
        "[run]\ndeterministic = true\nthreads = 2\n");
    RunConfig cfg = parse_config_text(in, "mem");
    CHECK(cfg.n == std::array<int, 3>{4, 6, 8});
    CHECK(cfg.h == 1.25);
    CHECK(cfg.mode == VeeMode::rank1);
    CHECK(cfg.warm_start);
    CHECK(cfg.storage == StorageMode::tensor);
    CHECK(cfg.threads == 2);

    // the rendered config parses back to the same settings
    std::istringstream again(render_config(cfg));
    RunConfig cfg2 = parse_config_text(again, "mem2");
    CHECK(render_config(cfg2) == render_config(cfg));

    std::istringstream unknown("[grid]\nstep = 1\n");
    CHECK_THROWS_AS(parse_config_text(unknown, "mem"), ParseError);
    std::istringstream badtol("[scf]\ninner_tol = 0\n");
    CHECK_THROWS_AS(parse_config_text(badtol, "mem"), ParseError);
    std::istringstream badmode("[scf]\nmode = refined\n");
    CHECK_THROWS_AS(parse_config_text(badmode, "mem"), ParseError);
}

TEST_CASE("scf command: artifacts, cache determinism, non-convergence") {
    TempDir t;
    std::string sys_path = t.file("h.sys", "units au\nm 1\nH 0 0 0\nH 0.9 0 0\n");
    std::string cfg_path = base_config(t, sys_path, "");

    std::ostringstream out1;
    REQUIRE(scf_command(cfg_path, out1) == 0);
    CHECK(out1.str().find("building") != std::string::npos);
    for (const char* f : {"energy.txt", "scf_log.tsv", "resolved.cfg", "orbitals.hfct", "run.txt"})
        CHECK(fs::exists(fs::path(t.sub("out")) / f));
    std::string energy1 = slurp(t.sub("out") + "/energy.txt");
    CHECK(energy1.find("T_e ") != std::string::npos);
    CHECK(energy1.find("V_en ") != std::string::npos);
    CHECK(energy1.find("V_ee ") != std::string::npos);
    CHECK(energy1.find("E_total ") != std::string::npos);

    // warm cache: identical energies bit for bit
    std::ostringstream out2;
    REQUIRE(scf_command(cfg_path, out2) == 0);
    CHECK(out2.str().find("loaded") != std::string::npos);
    CHECK(slurp(t.sub("out") + "/energy.txt") == energy1);

    // orbital checkpoint holds one normalized orbital
    std::vector<CanonicalTensor> orbs;
    REQUIRE(load_tensor_checkpoint(t.sub("out") + "/orbitals.hfct", orbs));
    REQUIRE(orbs.size() == 1);
    CHECK(tensor_norm(orbs[0]) == doctest::Approx(1.0).epsilon(1e-10));

    // a corrupted cache entry triggers a rebuild with a notice, same result
    for (const auto& entry : fs::directory_iterator(t.sub("cache"))) {
        std::ofstream f(entry.path(), std::ios::trunc);
        f << "junk";
    }
    std::ostringstream out3;
    REQUIRE(scf_command(cfg_path, out3) == 0);
    CHECK(out3.str().find("building") != std::string::npos);
    CHECK(slurp(t.sub("out") + "/energy.txt") == energy1);

    // forced non-convergence: exit 2, artifacts still written
    std::string hard = base_config(t, sys_path, "[scf]\nmax_outer = 1\nouter_tol = 1e-15\n");
    std::ostringstream out4;
    CHECK(scf_command(hard, out4) == 2);
    CHECK(out4.str().find("not converged") != std::string::npos);
    CHECK(slurp(t.sub("out") + "/run.txt").find("converged = 0") != std::string::npos);

    // bad config path: exit 1 with the path in the message
    std::ostringstream out5;
    CHECK(scf_command(t.sub("nope.cfg"), out5) == 1);
    CHECK(out5.str().find("nope.cfg") != std::string::npos);
}

TEST_CASE("tables and report commands") {
    TempDir t;
    std::string sys_path = t.file("h.sys", "units au\nm 1\nH 0 0 0\n");
    std::string cfg_path = base_config(t, sys_path, "");
    std::ostringstream out;
    REQUIRE(tables_command(cfg_path, out) == 0);
    CHECK(out.str().find("four-center classes") != std::string::npos);

    std::ostringstream run_out;
    REQUIRE(scf_command(cfg_path, run_out) == 0);

    // one run -> one row; dense rows have an empty rank column
    std::ostringstream rep;
    REQUIRE(report_command({t.sub("out"), t.sub("absent")}, rep) == 0);
    std::istringstream lines(rep.str());
    std::string header, row1, row2;
    std::getline(lines, header);
    std::getline(lines, row1);
    std::getline(lines, row2);
    CHECK(header == "L\tm\tR\tT\tM\tE");
    CHECK(row1.substr(0, 8) == "4x4x4\t1\t");
    CHECK(row1[8] == '\t');  // empty rank column for dense storage
    CHECK(row2.find("missing") != std::string::npos);

    // corrupted run file is flagged, the report is still produced
    fs::create_directories(t.sub("broken"));
    std::ofstream(t.sub("broken") + "/run.txt") << "not a run file\n";
    std::ostringstream rep2;
    REQUIRE(report_command({t.sub("broken")}, rep2) == 0);
    CHECK(rep2.str().find("corrupted") != std::string::npos);
}

TEST_CASE("tensor storage run records ranks") {
    TempDir t;
    std::string sys_path = t.file("h.sys", "units au\nm 1\nH 0 0 0\n");
    std::string cfg_path =
        base_config(t, sys_path, "[storage]\nmode = tensor\ntensor_tol = 1e-8\nrank_max = 4\n");
    std::ostringstream out;
    REQUIRE(scf_command(cfg_path, out) == 0);
    std::string run = slurp(t.sub("out") + "/run.txt");
    CHECK(run.find("storage = tensor") != std::string::npos);
    CHECK(run.find("ranks = 1") != std::string::npos);  // p = 0 orbital is rank 1

    std::ostringstream rep;
    REQUIRE(report_command({t.sub("out")}, rep) == 0);
    CHECK(rep.str().find("\t1\t1\t") != std::string::npos);  // rank column filled
}

TEST_CASE("selfcheck runs clean") {
    std::ostringstream out;
    CHECK(selfcheck_command(out) == 0);
    CHECK(out.str().find("selfcheck passed") != std::string::npos);
    CHECK(out.str().find("FAIL") == std::string::npos);
}
