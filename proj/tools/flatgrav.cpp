// flatgrav: reduced energy-Casimir steady states of the flat
// Vlasov-Poisson system and their stability harness.

#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "flatgrav/cli/commands.hpp"

namespace {

struct Subcommand {
    flatgrav::cli::Command command;
    const char* summary;
};

constexpr Subcommand subcommands[] = {
    {flatgrav::cli::Command::reduce, "tabulate the reduced model psi of the phase-space model"},
    {flatgrav::cli::Command::solve, "solve the reduced variational problem and save the solution"},
    {flatgrav::cli::Command::lift, "lift a saved solution to phase space and check consistency"},
    {flatgrav::cli::Command::verify, "run the check battery and write check reports"},
    {flatgrav::cli::Command::simulate, "evolve a sampled steady state with the particle-in-cell harness"},
    {flatgrav::cli::Command::scan_mass, "tabulate h_M over the configured masses"},
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Steady states and stability runs for the flat Vlasov-Poisson system"};
    app.require_subcommand(1);
    app.footer("Exit status: 0 success, 1 failed check, 2 usage error.\n"
               "FLATGRAV_THREADS caps the worker threads (default: all cores).");

    std::filesystem::path config, output;
    flatgrav::cli::Command chosen = flatgrav::cli::Command::reduce;
    for (const auto& s : subcommands) {
        auto* sub = app.add_subcommand(std::string(flatgrav::cli::command_name(s.command)), s.summary);
        sub->add_option("config", config, "config file")->required()->check(CLI::ExistingFile);
        sub->add_option("-o,--output", output, "override [output] directory");
        sub->footer(flatgrav::cli::keys_help(s.command));
        sub->callback([&chosen, c = s.command] { chosen = c; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : flatgrav::cli::exit_usage;
    }
    return flatgrav::cli::run_command(chosen, config, output, std::cout, std::cerr);
}
