#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gridhf/system.hpp"

int main(int argc, char** argv) {
    CLI::App app{"structured-matrix Hartree-Fock on regular grids"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> run_dirs;
    int threads = 0;
    app.add_option("--threads", threads, "global worker cap (0: from config)");

    CLI::App* tables = app.add_subcommand("tables", "build or refresh cached integral tables");
    tables->add_option("config", config_path, "run config file")->required();

    CLI::App* scf = app.add_subcommand("scf", "run the SCF solver");
    scf->add_option("config", config_path, "run config file")->required();

    CLI::App* report = app.add_subcommand("report", "aggregate run directories into one table");
    report->add_option("runs", run_dirs, "run output directories")->required();

    app.add_subcommand("selfcheck", "run the built-in invariant suite");

    CLI11_PARSE(app, argc, argv);

    if (tables->parsed()) return gridhf::tables_command(config_path, std::cout);
    if (scf->parsed()) return gridhf::scf_command(config_path, std::cout);
    if (report->parsed()) return gridhf::report_command(run_dirs, std::cout);
    return gridhf::selfcheck_command(std::cout);
}
