#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "qkd/discrimination.hpp"
#include "qkd/protocol.hpp"

namespace qkd {

// Invalid scenario/problem input. The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Scenario {
    ProtocolConfig protocol;
    std::optional<std::string> report_path;
    std::optional<std::string> trace_path;
    nlohmann::json echo;  // validated source document, echoed into the report
};

// Accepts JSON or the TOML subset described in the README. Unknown keys are
// rejected and missing required keys reported with their path.
Scenario parse_scenario_file(const std::string& path);
Scenario parse_scenario_text(const std::string& text, bool is_toml);

// Strict little TOML reader: [section] headers (dotted), key = value with
// string/integer/float/boolean/flat-array values, # comments.
nlohmann::json toml_subset_to_json(const std::string& text);

nlohmann::json report_to_json(const Scenario& scenario, const SessionReport& report, double wall_seconds);

std::string render_trace_csv(const std::vector<Round>& trace, const OperatorCatalog& catalog);

// Reconstructed keep/discard + coding tables: one row per
// (alice basis, operator, measurement basis). Operators with no valid image
// on a source basis are marked N on that basis's rows.
std::string render_tables_csv(CatalogKind kind, std::optional<double> theta);

// Batch discrimination: {"states": [[[re,im],...],...], "priors": [...]}.
nlohmann::json run_discrimination_problem(const nlohmann::json& problem);

inline constexpr const char* kToolName = "qkdsim";
inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace qkd
