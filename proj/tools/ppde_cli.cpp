// Command-line experiment runner. Exit codes: 0 all flagged checks passed,
// 1 a numerical check failed, 2 usage or configuration error.

#include <cstdlib>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "ppde/cli.hpp"
#include "ppde/version.hpp"

int main(int argc, char** argv) {
    CLI::App app{"path-dependent PDE scheme: experiments and diagnostics"};
    app.set_version_flag("--version", std::string(ppde::kVersion));
    app.require_subcommand(1);

    static const struct {
        const char* name;
        const char* help;
    } kCommands[] = {
        {"solve", "evaluate the scheme at one grid level, optionally dumping boundary fields"},
        {"converge", "run a level ladder and report gaps, the fitted rate, and the Cauchy check"},
        {"gridcheck", "compare the limits reached along two refinement sequences"},
        {"modulus", "regularity ratio tables for space bumps and time offsets"},
        {"stability", "value drift under a perturbed instance parameter"},
        {"classical", "gap against a known closed-form solution across levels"},
        {"mc", "sampling backend values, optionally with martingale diagnostics"},
        {"dupire", "vertical derivative ladder and regularity certificates"},
        {"validate", "assumption probes: data structure, smoothing, fixture roughness"},
    };

    std::string config_file, output, dump_field;
    for (const auto& c : kCommands) {
        CLI::App* sub = app.add_subcommand(c.name, c.help);
        sub->add_option("--config", config_file, "configuration file")->required();
        sub->add_option("--output", output, "output directory (overrides config and environment)");
        if (std::string(c.name) == "solve")
            sub->add_option("--dump-field", dump_field, "also write boundary value fields to this CSV");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    const std::string cmd = app.get_subcommands().front()->get_name();
    const char* env_out = std::getenv("PPDE_OUTPUT");
    const std::string out_override = !output.empty() ? output : (env_out ? std::string(env_out) : "");

    try {
        const ppde::Config cfg = ppde::Config::parse_file(config_file);
        return ppde::cli::run_command(cmd, cfg, out_override, std::cout, dump_field);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
