#include <chrono>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "qkd/scenario.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

void write_or_print(const std::optional<std::string>& path, const std::string& content) {
    if (!path) {
        std::cout << content;
        return;
    }
    std::ofstream out(*path);
    if (!out) throw std::runtime_error("cannot write output file: " + *path);
    out << content;
}

int run_scenario(const std::string& scenario_path, std::optional<std::string> out_path,
                 std::optional<std::string> trace_path, std::optional<int> threads,
                 std::optional<std::uint64_t> seed) {
    qkd::Scenario scenario = qkd::parse_scenario_file(scenario_path);
    if (threads) scenario.protocol.threads = *threads;
    if (seed) scenario.protocol.seed = *seed;
    if (!out_path && scenario.report_path) out_path = scenario.report_path;
    if (!trace_path && scenario.trace_path) trace_path = scenario.trace_path;

    const qkd::OperatorCatalog catalog = qkd::build_catalog_for(scenario.protocol);

    std::vector<qkd::Round> trace;
    const auto t0 = std::chrono::steady_clock::now();
    const qkd::SessionReport report =
        qkd::run_session(scenario.protocol, trace_path ? &trace : nullptr);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    write_or_print(out_path, qkd::report_to_json(scenario, report, wall).dump(2) + "\n");
    if (trace_path) write_or_print(trace_path, qkd::render_trace_csv(trace, catalog));
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Simulator for delegated-measurement prepare-measure QKD protocols"};
    app.require_subcommand(1);

    std::string scenario_path;
    std::optional<std::string> out_path;
    std::optional<std::string> trace_path;
    std::optional<int> threads;
    std::optional<std::uint64_t> seed;

    CLI::App* run = app.add_subcommand("run", "Execute a session described by a scenario file");
    run->add_option("--scenario", scenario_path, "Scenario file (JSON or TOML)")->required();
    run->add_option("--out", out_path, "Report destination (default: stdout or scenario output.report)");
    run->add_option("--trace", trace_path, "Per-round CSV trace destination");
    run->add_option("--threads", threads, "Worker threads (identical results for any count)");
    run->add_option("--seed", seed, "Override the scenario seed");

    std::string kind_name;
    std::optional<double> theta;
    std::optional<std::string> tables_out;
    CLI::App* tables = app.add_subcommand("dump-tables", "Emit the keep/discard and coding tables as CSV");
    tables->add_option("--kind", kind_name, "bb84-4, bb84-8, six-state-24 or general-12")->required();
    tables->add_option("--theta", theta, "Basis angle for general-12");
    tables->add_option("--out", tables_out, "CSV destination (default: stdout)");

    std::string problem_path;
    std::optional<std::string> result_out;
    CLI::App* disc = app.add_subcommand("discriminate", "Solve a state-discrimination problem file");
    disc->add_option("--problem", problem_path, "Problem JSON file")->required();
    disc->add_option("--out", result_out, "Result destination (default: stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return run_scenario(scenario_path, out_path, trace_path, threads, seed);
        if (tables->parsed()) {
            const auto kind = qkd::catalog_kind_from_string(kind_name);
            if (!kind) throw qkd::ConfigError("unknown catalog kind: " + kind_name);
            if (*kind == qkd::CatalogKind::General12 && !theta) {
                throw qkd::ConfigError("general-12 tables need --theta");
            }
            write_or_print(tables_out, qkd::render_tables_csv(*kind, theta));
            return kExitOk;
        }
        if (disc->parsed()) {
            std::ifstream in(problem_path);
            if (!in) throw qkd::ConfigError("cannot read problem file: " + problem_path);
            const nlohmann::json problem = nlohmann::json::parse(in, nullptr, /*allow_exceptions=*/false);
            if (problem.is_discarded()) throw qkd::ConfigError("problem: invalid JSON");
            write_or_print(result_out, qkd::run_discrimination_problem(problem).dump(2) + "\n");
            return kExitOk;
        }
    } catch (const qkd::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitOk;
}
