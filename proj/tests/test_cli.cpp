#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "qkd/scenario.hpp"

using namespace qkd;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct CliResult {
    int exit_code;
    std::string stdout_text;
};

fs::path work_dir() {
    static const fs::path dir = [] {
        fs::path p = fs::temp_directory_path() / "qkdsim_cli_tests";
        fs::create_directories(p);
        return p;
    }();
    return dir;
}

CliResult run_cli(const std::string& args) {
    const fs::path out = work_dir() / "stdout.txt";
    const std::string cmd = std::string(QKDSIM_BIN_PATH) + " " + args + " > " + out.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    std::ifstream in(out);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return {WEXITSTATUS(status), buffer.str()};
}

fs::path write_file(const std::string& name, const std::string& content) {
    const fs::path p = work_dir() / name;
    std::ofstream out(p);
    out << content;
    return p;
}

const char* kHonestScenario = R"({
  "protocol": {"kind": "bb84-4", "rounds": 20000, "seed": 7, "error_sample_fraction": 0.1}
})";

}  // namespace

TEST_CASE("toml subset parses sections, scalars and arrays") {
    const json doc = toml_subset_to_json(R"(
# session setup
[protocol]
kind = "bb84-4"   # protocol family
rounds = 1000
seed = 42
error_sample_fraction = 0.25
[protocol.pnp]
enabled = true
bases = ["Z", "X"]
)");
    CHECK(doc["protocol"]["kind"] == "bb84-4");
    CHECK(doc["protocol"]["rounds"] == 1000);
    CHECK(doc["protocol"]["error_sample_fraction"] == 0.25);
    CHECK(doc["protocol"]["pnp"]["enabled"] == true);
    CHECK(doc["protocol"]["pnp"]["bases"] == json::array({"Z", "X"}));

    CHECK_THROWS_AS(toml_subset_to_json("key value-without-equals"), ConfigError);
    CHECK_THROWS_AS(toml_subset_to_json("[unclosed\nk = 1"), ConfigError);
    CHECK_THROWS_AS(toml_subset_to_json("k = \"unterminated"), ConfigError);
}

TEST_CASE("scenario validation reports paths") {
    CHECK_THROWS_WITH_AS(parse_scenario_text(R"({"protocol": {"kind": "bb84-4", "rounds": 10}})", false),
                         doctest::Contains("scenario.protocol.seed"), ConfigError);
    CHECK_THROWS_WITH_AS(parse_scenario_text(R"({"protocol": {"kind": "bb84-4", "rounds": 10, "seed": 1,
                                                "typo_key": 3}})", false),
                         doctest::Contains("typo_key"), ConfigError);
    CHECK_THROWS_WITH_AS(parse_scenario_text(R"({"protocol": {"kind": "nope", "rounds": 10, "seed": 1}})", false),
                         doctest::Contains("kind"), ConfigError);
    CHECK_THROWS_AS(parse_scenario_text("{invalid", false), ConfigError);

    // both formats reach the same validated config
    const Scenario a = parse_scenario_text(kHonestScenario, false);
    const Scenario b = parse_scenario_text("[protocol]\nkind = \"bb84-4\"\nrounds = 20000\nseed = 7\n"
                                           "error_sample_fraction = 0.1\n",
                                           true);
    CHECK(a.protocol.kind == b.protocol.kind);
    CHECK(a.protocol.rounds == b.protocol.rounds);
    CHECK(a.protocol.seed == b.protocol.seed);
}

TEST_CASE("cli run executes a scenario and honors the exit code contract") {
    const fs::path scenario = write_file("honest.json", kHonestScenario);
    const fs::path report = work_dir() / "honest_report.json";
    const CliResult ok = run_cli("run --scenario " + scenario.string() + " --out " + report.string());
    CHECK(ok.exit_code == 0);

    std::ifstream in(report);
    const json doc = json::parse(in);
    CHECK(doc["report"]["rounds_total"] == 20000);
    CHECK(doc["report"]["qber"] == 0.0);
    const double sift = doc["report"]["sift_fraction"].get<double>();
    CHECK(sift > 0.47);
    CHECK(sift < 0.53);

    // config errors exit with 2
    const fs::path broken = write_file("broken.json", R"({"protocol": {"kind": "bb84-4"}})");
    CHECK(run_cli("run --scenario " + broken.string()).exit_code == 2);
    CHECK(run_cli("run --scenario " + (work_dir() / "missing.json").string()).exit_code == 2);
}

TEST_CASE("cli accepts toml scenarios") {
    const fs::path scenario = write_file("general.toml",
                                         "[protocol]\n"
                                         "kind = \"general-12\"\n"
                                         "theta = 0.5235987755982988\n"
                                         "rounds = 20000\n"
                                         "seed = 11\n"
                                         "error_sample_fraction = 0.1\n");
    const fs::path report = work_dir() / "general_report.json";
    CHECK(run_cli("run --scenario " + scenario.string() + " --out " + report.string()).exit_code == 0);
    std::ifstream in(report);
    const json doc = json::parse(in);
    const double sift = doc["report"]["sift_fraction"].get<double>();
    CHECK(sift > 0.47);
    CHECK(sift < 0.53);
    CHECK(doc["report"]["qber"] == 0.0);
}

TEST_CASE("report structure is stable") {
    const Scenario scenario = parse_scenario_text(kHonestScenario, false);
    const SessionReport session = run_session(scenario.protocol);
    const json doc = report_to_json(scenario, session, 0.0);

    const std::set<std::string> top = {"tool", "wall_clock_seconds", "config", "report"};
    std::set<std::string> got;
    for (const auto& item : doc.items()) got.insert(item.key());
    CHECK(got == top);

    const std::set<std::string> report_keys = {
        "rounds_total", "kept_count", "raw_key_bits", "key_source_pulses", "error_sample_count", "error_disagreements",
        "empty_detections", "sift_fraction", "qber", "eve_guess_rate", "qubits_per_raw_bit",
        "asymptotic_key_rate", "reference_mdi_qubits_per_bit", "pnp", "eve", "decoy"};
    std::set<std::string> got_report;
    for (const auto& item : doc["report"].items()) got_report.insert(item.key());
    CHECK(got_report == report_keys);
    CHECK(doc["report"]["reference_mdi_qubits_per_bit"] == 8.0);
}

TEST_CASE("identical scenario and seed reproduce the report byte for byte") {
    const fs::path scenario = write_file("det.json", kHonestScenario);
    const fs::path r1 = work_dir() / "det1.json";
    const fs::path r2 = work_dir() / "det2.json";
    CHECK(run_cli("run --scenario " + scenario.string() + " --out " + r1.string()).exit_code == 0);
    CHECK(run_cli("run --scenario " + scenario.string() + " --out " + r2.string() + " --threads 4").exit_code == 0);

    std::ifstream f1(r1), f2(r2);
    json d1 = json::parse(f1), d2 = json::parse(f2);
    d1.erase("wall_clock_seconds");
    d2.erase("wall_clock_seconds");
    CHECK(d1.dump() == d2.dump());

    // seed override changes stochastic fields
    const fs::path r3 = work_dir() / "det3.json";
    CHECK(run_cli("run --scenario " + scenario.string() + " --out " + r3.string() + " --seed 99").exit_code == 0);
    std::ifstream f3(r3);
    json d3 = json::parse(f3);
    CHECK(d3["report"]["kept_count"] != d1["report"]["kept_count"]);
}

TEST_CASE("trace emits one csv row per round") {
    const fs::path scenario = write_file("trace.json", R"({
      "protocol": {"kind": "six-state-24", "rounds": 50, "seed": 3, "error_sample_fraction": 0.2,
                   "pnp": {"enabled": true}}
    })");
    const fs::path report = work_dir() / "trace_report.json";
    const fs::path trace = work_dir() / "trace.csv";
    CHECK(run_cli("run --scenario " + scenario.string() + " --out " + report.string() + " --trace " +
                  trace.string())
              .exit_code == 0);
    std::ifstream in(trace);
    std::string line;
    int lines = 0;
    std::getline(in, line);
    CHECK(line ==
          "index,alice_basis,alice_index,bob_operator,pnp_basis,meas_basis,outcome,verdict,alice_bit,bob_bit");
    while (std::getline(in, line))
        if (!line.empty()) ++lines;
    CHECK(lines == 50);
}

TEST_CASE("undelegated runs trace without an operator column") {
    const fs::path scenario = write_file("plain.json", R"({
      "protocol": {"kind": "bb84-4", "rounds": 40, "seed": 9, "error_sample_fraction": 0.2,
                   "delegate_measurement": false}
    })");
    const fs::path report = work_dir() / "plain_report.json";
    const fs::path trace = work_dir() / "plain_trace.csv";
    CHECK(run_cli("run --scenario " + scenario.string() + " --out " + report.string() + " --trace " +
                  trace.string())
              .exit_code == 0);
    std::ifstream in(trace);
    std::string line;
    std::getline(in, line);  // header
    int rows = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        ++rows;
        std::stringstream row(line);
        std::string col;
        std::vector<std::string> cols;
        while (std::getline(row, col, ',')) cols.push_back(col);
        CHECK(cols[3] == "-");  // no encoding operator in the ordinary run
    }
    CHECK(rows == 40);
}

TEST_CASE("six-state pnp bases parse by name") {
    const Scenario s = parse_scenario_text(R"({
      "protocol": {"kind": "six-state-24", "rounds": 2000, "seed": 4, "error_sample_fraction": 0.2,
                   "pnp": {"enabled": true, "bases": ["Z", "X", "Y"]}}
    })",
                                           false);
    CHECK(s.protocol.pnp.bases.size() == 3);
    const SessionReport r = run_session(s.protocol);
    REQUIRE(r.qber.has_value());
    CHECK(*r.qber == 0.0);
}

TEST_CASE("dump-tables reconstructs the keep/discard tables") {
    const CliResult six = run_cli("dump-tables --kind six-state-24");
    CHECK(six.exit_code == 0);
    std::set<std::string> kept_zz;
    std::istringstream in(six.stdout_text);
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        std::vector<std::string> cols;
        std::stringstream row(line);
        std::string col;
        while (std::getline(row, col, ',')) cols.push_back(col);
        REQUIRE(cols.size() == 7);
        if (cols[2] == "Z" && cols[4] == "Z" && cols[5] == "kept") kept_zz.insert(cols[3]);
    }
    CHECK(kept_zz == std::set<std::string>{"I", "X", "Z", "XZ", "H2", "H2X", "H2Z", "H2XZ"});

    // bb84-8, bases agree: the four basis-preserving operators are kept
    const CliResult eight = run_cli("dump-tables --kind bb84-8");
    std::set<std::string> kept_agree;
    std::istringstream in8(eight.stdout_text);
    std::getline(in8, line);
    while (std::getline(in8, line)) {
        std::vector<std::string> cols;
        std::stringstream row(line);
        std::string col;
        while (std::getline(row, col, ',')) cols.push_back(col);
        if (cols[2] == cols[4] && cols[5] == "kept") kept_agree.insert(cols[3]);
    }
    CHECK(kept_agree == std::set<std::string>{"I", "X", "Z", "XZ"});

    // general-12 marks invalid (state, operator) pairs with N
    const CliResult gen = run_cli("dump-tables --kind general-12 --theta 0.5235987755982988");
    CHECK(gen.exit_code == 0);
    CHECK(gen.stdout_text.find(",N,") != std::string::npos);
    CHECK(run_cli("dump-tables --kind general-12").exit_code == 2);  // theta missing
}

TEST_CASE("discriminate subcommand solves problem files") {
    const fs::path problem = write_file("bb84_problem.json", R"({
      "states": [[[1,0],[0,0]], [[0,0],[1,0]],
                 [[0.7071067811865476,0],[0.7071067811865476,0]],
                 [[0.7071067811865476,0],[-0.7071067811865476,0]]]
    })");
    const CliResult r = run_cli("discriminate --problem " + problem.string());
    CHECK(r.exit_code == 0);
    const json doc = json::parse(r.stdout_text);
    CHECK(doc["min_error"]["success"].get<double>() == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(doc["min_error"]["certified"] == true);
    CHECK(doc["usd"]["feasible"] == false);

    const fs::path pair = write_file("pair_problem.json", R"({
      "states": [[[1,0],[0,0]], [[0.7071067811865476,0],[0.7071067811865476,0]]]
    })");
    const CliResult r2 = run_cli("discriminate --problem " + pair.string());
    const json doc2 = json::parse(r2.stdout_text);
    CHECK(doc2["min_error"]["success"].get<double>() == doctest::Approx(0.8535533905932737).epsilon(1e-6));
    CHECK(doc2["usd"]["feasible"] == true);

    const fs::path bad = write_file("bad_problem.json", R"({"states": [[[1,0]]], "priors": [2]})");
    CHECK(run_cli("discriminate --problem " + bad.string()).exit_code == 2);
}
