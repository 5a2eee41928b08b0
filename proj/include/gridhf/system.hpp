#pragma once
#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include "tensor.hpp"

namespace gridhf {

constexpr double angstrom_per_bohr_inv = 1.8897259886;  // a.u. per Angstrom

// charge for H..Ar; throws ParseError listing the known symbols
double element_charge(const std::string& symbol);

struct NucleusSite {
    double charge = 0.0;
    std::array<double, 3> r{0.0, 0.0, 0.0};  // a.u.
};

// Parsed system definition: nuclei, electron-pair count, optional box
// override. Lines: "units au|angstrom", "m <count>", "box <ni> <nj> <nk>",
// "<element-or-charge> <x> <y> <z>"; '#' starts a comment.
struct SystemFile {
    std::vector<NucleusSite> sites;
    int m = 1;
    bool has_box = false;
    std::array<int, 3> box{0, 0, 0};
    std::string units = "au";
};

SystemFile parse_system(const std::string& path);
SystemFile parse_system_text(std::istream& in, const std::string& label);

enum class StorageMode { dense, tensor };

// One run manifest: sectioned key-value text, written back resolved next to
// the outputs so a run can be replayed exactly.
struct RunConfig {
    std::string system_path;

    std::array<int, 3> n{8, 8, 8};
    double h = 1.0;
    int p = 0;
    Boundary boundary = Boundary::periodic;
    double eta = 1e-7;

    VeeMode mode = VeeMode::exact;
    double inner_tol = 1e-8;
    double outer_tol = 1e-8;
    int max_outer = 100;
    int maxspace = 30;
    bool warm_start = false;
    double mixing = 0.0;
    Preconditioner::Kind prec = Preconditioner::Kind::circulant_fit;

    StorageMode storage = StorageMode::dense;
    double tensor_tol = 1e-8;
    int rank_max = 16;

    std::string cache_dir;  // empty: HF_CACHE_DIR env, else ".gridhf_cache"
    std::string out_dir = ".";
    bool deterministic = true;
    int threads = 1;

    void validate() const;  // throws ParseError on inconsistent settings
};

RunConfig parse_config(const std::string& path);
RunConfig parse_config_text(std::istream& in, const std::string& label);
std::string render_config(const RunConfig& cfg);

// effective cache directory (config > HF_CACHE_DIR > default)
std::string cache_directory(const RunConfig& cfg);

// Build the discretized system, loading integral tables from the cache when
// the descriptor hash matches and writing them back otherwise. `notice`
// receives one line about the cache decision.
HFSystem load_system(const RunConfig& cfg, const SystemFile& sf, std::ostream& notice);

// CLI verbs; each returns the process exit code (0 ok, 2 reported
// non-convergence, 1 error).
int tables_command(const std::string& config_path, std::ostream& out);
int scf_command(const std::string& config_path, std::ostream& out);
int report_command(const std::vector<std::string>& run_dirs, std::ostream& out);
int selfcheck_command(std::ostream& out);

} // namespace gridhf
