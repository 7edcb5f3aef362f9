#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"

#include "macroqed/cli/scenario.hpp"

namespace {

constexpr int exit_validation = 2;
constexpr int exit_convergence = 3;

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw macroqed::ValidationError(path + ": cannot open config file");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"macroqed: quantum optics in absorbing dielectrics"};
    app.require_subcommand(1);

    std::string config_path, out_path;
    int threads = 1;
    auto* run = app.add_subcommand("run", "evaluate a scenario and write CSV");
    run->add_option("config", config_path, "scenario config (JSON)")->required();
    run->add_option("--out", out_path, "output path (default: stdout)");
    run->add_option("--threads", threads, "worker threads for sweep points")->check(CLI::PositiveNumber);

    std::string validate_path;
    auto* val = app.add_subcommand("validate", "check a scenario config");
    val->add_option("config", validate_path, "scenario config (JSON)")->required();

    app.add_subcommand("list-scenarios", "describe scenarios, parameters and CSV columns");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : exit_validation;
    }

    try {
        if (app.got_subcommand("list-scenarios")) {
            std::cout << macroqed::cli::list_scenarios();
            return 0;
        }
        if (app.got_subcommand("validate")) {
            const auto sc = macroqed::cli::validate_text(read_file(validate_path));
            std::cout << "ok: " << sc.kind;
            if (!sc.sweep.variable.empty())
                std::cout << ", " << sc.sweep.values.size() << " points in " << sc.sweep.variable;
            std::cout << "\n";
            return 0;
        }
        const auto sc = macroqed::cli::validate_text(read_file(config_path));
        const auto table = macroqed::cli::run(sc, threads);
        for (const auto& [k, v] : table.metadata)
            if (k == "warning") std::cerr << "warning: " << v << "\n";
        if (out_path.empty()) {
            macroqed::cli::write_csv(std::cout, table);
        } else {
            std::ofstream out(out_path);
            if (!out) throw macroqed::ValidationError(out_path + ": cannot open output file");
            macroqed::cli::write_csv(out, table);
        }
        return 0;
    } catch (const macroqed::ValidationError& e) {
        std::cerr << "validation error:\n" << e.what() << "\n";
        return exit_validation;
    } catch (const macroqed::DomainError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return exit_validation;
    } catch (const macroqed::ConvergenceError& e) {
        std::cerr << "numeric non-convergence: " << e.what() << " (achieved error " << e.achieved_error()
                  << ")\n";
        return exit_convergence;
    }
}
