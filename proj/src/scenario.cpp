#include "qkd/scenario.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

namespace qkd {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw ConfigError(path + ": " + what);
}

void check_allowed(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
    for (const auto& item : obj.items()) {
        bool known = false;
        for (const char* k : allowed) known = known || item.key() == k;
        if (!known) fail(path + "." + item.key(), "unknown key");
    }
}

const json* find(const json& obj, const std::string& key) {
    const auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
}

double as_number(const json& v, const std::string& path) {
    if (!v.is_number()) fail(path, "expected a number");
    return v.get<double>();
}

std::int64_t as_integer(const json& v, const std::string& path) {
    if (!v.is_number_integer()) fail(path, "expected an integer");
    return v.get<std::int64_t>();
}

std::string as_string(const json& v, const std::string& path) {
    if (!v.is_string()) fail(path, "expected a string");
    return v.get<std::string>();
}

bool as_bool(const json& v, const std::string& path) {
    if (!v.is_boolean()) fail(path, "expected a boolean");
    return v.get<bool>();
}

MeasurementBasis basis_from_name(const std::string& name, std::optional<double> theta, const std::string& path) {
    if (name == "Z") return MeasurementBasis::z();
    if (name == "X") return MeasurementBasis::x();
    if (name == "Y") return MeasurementBasis::y();
    if (name == "B1") {
        if (!theta) fail(path, "basis B1 needs protocol.theta");
        return MeasurementBasis::general(*theta);
    }
    fail(path, "unknown basis name: " + name);
}

void parse_pnp(const json& obj, const std::string& path, ProtocolConfig& cfg) {
    check_allowed(obj, path, {"enabled", "bases", "gate_fidelity", "control_policy"});
    if (const json* v = find(obj, "enabled")) cfg.pnp.enabled = as_bool(*v, path + ".enabled");
    if (const json* v = find(obj, "gate_fidelity")) cfg.pnp.gate_fidelity = as_number(*v, path + ".gate_fidelity");
    if (const json* v = find(obj, "control_policy")) {
        const std::string p = as_string(*v, path + ".control_policy");
        if (p == "first") {
            cfg.pnp.control_policy = ControlPolicy::First;
        } else if (p == "random") {
            cfg.pnp.control_policy = ControlPolicy::Random;
        } else {
            fail(path + ".control_policy", "expected \"first\" or \"random\"");
        }
    }
    if (const json* v = find(obj, "bases")) {
        if (!v->is_array()) fail(path + ".bases", "expected an array of basis names");
        for (size_t i = 0; i < v->size(); ++i) {
            const std::string bp = path + ".bases[" + std::to_string(i) + "]";
            cfg.pnp.bases.push_back(basis_from_name(as_string((*v)[i], bp), cfg.theta, bp));
        }
    }
}

void parse_attack(const json& obj, const std::string& path, ProtocolConfig& cfg) {
    check_allowed(obj, path, {"kind", "basis", "probes", "method", "block_single"});
    const json* kind = find(obj, "kind");
    if (!kind) fail(path + ".kind", "missing required key");
    const std::string k = as_string(*kind, path + ".kind");
    if (k == "none") {
        cfg.attack.kind = AttackKind::None;
    } else if (k == "intercept-resend") {
        cfg.attack.kind = AttackKind::InterceptResend;
    } else if (k == "pna") {
        cfg.attack.kind = AttackKind::Pna;
    } else if (k == "pns") {
        cfg.attack.kind = AttackKind::Pns;
    } else {
        fail(path + ".kind", "unknown attack kind: " + k);
    }
    if (const json* v = find(obj, "basis")) {
        const std::string b = as_string(*v, path + ".basis");
        if (b != "random") cfg.attack.ir_basis = basis_from_name(b, cfg.theta, path + ".basis");
    }
    if (const json* v = find(obj, "probes")) {
        if (!v->is_array()) fail(path + ".probes", "expected an array of ket names");
        for (size_t i = 0; i < v->size(); ++i) {
            const std::string pp = path + ".probes[" + std::to_string(i) + "]";
            const std::string name = as_string((*v)[i], pp);
            try {
                cfg.attack.pna_probes.push_back(PureState::ket(name));
            } catch (const std::invalid_argument& e) {
                fail(pp, e.what());
            }
        }
    }
    if (const json* v = find(obj, "method")) {
        const std::string m = as_string(*v, path + ".method");
        if (m == "min-error") {
            cfg.attack.pna_method = DiscriminationMethod::MinError;
        } else if (m == "usd") {
            cfg.attack.pna_method = DiscriminationMethod::Unambiguous;
        } else {
            fail(path + ".method", "expected \"min-error\" or \"usd\"");
        }
    }
    if (const json* v = find(obj, "block_single")) cfg.attack.pns_block_single = as_number(*v, path + ".block_single");
}

void parse_decoy(const json& obj, const std::string& path, ProtocolConfig& cfg) {
    check_allowed(obj, path, {"levels"});
    const json* levels = find(obj, "levels");
    if (!levels || !levels->is_array()) fail(path + ".levels", "expected an array of intensity levels");
    IntensitySchedule schedule;
    for (size_t i = 0; i < levels->size(); ++i) {
        const std::string lp = path + ".levels[" + std::to_string(i) + "]";
        const json& l = (*levels)[i];
        if (!l.is_object()) fail(lp, "expected an object");
        check_allowed(l, lp, {"label", "mu", "probability"});
        IntensityLevel level;
        const json* label = find(l, "label");
        if (!label) fail(lp + ".label", "missing required key");
        level.label = as_string(*label, lp + ".label");
        const json* mu = find(l, "mu");
        if (!mu) fail(lp + ".mu", "missing required key");
        level.mu = as_number(*mu, lp + ".mu");
        const json* prob = find(l, "probability");
        if (!prob) fail(lp + ".probability", "missing required key");
        level.probability = as_number(*prob, lp + ".probability");
        schedule.levels.push_back(std::move(level));
    }
    cfg.decoy = std::move(schedule);
}

ProtocolConfig parse_config(const json& doc) {
    if (!doc.is_object()) throw ConfigError("scenario: expected a top-level object");
    check_allowed(doc, "scenario", {"protocol", "channel", "attack", "measurer", "decoy", "output"});

    const json* protocol = find(doc, "protocol");
    if (!protocol) fail("scenario.protocol", "missing required key");
    if (!protocol->is_object()) fail("scenario.protocol", "expected an object");
    check_allowed(*protocol, "scenario.protocol",
                  {"kind", "theta", "coding", "rounds", "seed", "error_sample_fraction", "basis_chooser",
                   "delegate_measurement", "pnp", "threads"});

    ProtocolConfig cfg;
    const json* kind = find(*protocol, "kind");
    if (!kind) fail("scenario.protocol.kind", "missing required key");
    const auto parsed_kind = catalog_kind_from_string(as_string(*kind, "scenario.protocol.kind"));
    if (!parsed_kind) fail("scenario.protocol.kind", "unknown protocol kind");
    cfg.kind = *parsed_kind;

    if (const json* v = find(*protocol, "theta")) cfg.theta = as_number(*v, "scenario.protocol.theta");

    const json* rounds = find(*protocol, "rounds");
    if (!rounds) fail("scenario.protocol.rounds", "missing required key");
    cfg.rounds = as_integer(*rounds, "scenario.protocol.rounds");

    const json* seed = find(*protocol, "seed");
    if (!seed) fail("scenario.protocol.seed", "missing required key");
    cfg.seed = static_cast<std::uint64_t>(as_integer(*seed, "scenario.protocol.seed"));

    if (const json* v = find(*protocol, "error_sample_fraction")) {
        cfg.error_sample_fraction = as_number(*v, "scenario.protocol.error_sample_fraction");
    }
    if (const json* v = find(*protocol, "coding")) {
        const auto mode = coding_mode_from_string(as_string(*v, "scenario.protocol.coding"));
        if (!mode) fail("scenario.protocol.coding", "unknown coding mode");
        cfg.coding = *mode;
    }
    if (const json* v = find(*protocol, "basis_chooser")) {
        const std::string c = as_string(*v, "scenario.protocol.basis_chooser");
        if (c == "eve") {
            cfg.basis_chooser = BasisChooser::Eve;
        } else if (c == "bob") {
            cfg.basis_chooser = BasisChooser::Bob;
        } else if (c == "default") {
            cfg.basis_chooser = BasisChooser::PerKindDefault;
        } else {
            fail("scenario.protocol.basis_chooser", "expected \"eve\", \"bob\" or \"default\"");
        }
    }
    if (const json* v = find(*protocol, "delegate_measurement")) {
        cfg.delegate_measurement = as_bool(*v, "scenario.protocol.delegate_measurement");
    }
    if (const json* v = find(*protocol, "threads")) {
        cfg.threads = static_cast<int>(as_integer(*v, "scenario.protocol.threads"));
    }
    if (const json* v = find(*protocol, "pnp")) {
        if (!v->is_object()) fail("scenario.protocol.pnp", "expected an object");
        parse_pnp(*v, "scenario.protocol.pnp", cfg);
    }

    if (const json* v = find(doc, "channel")) {
        if (!v->is_object()) fail("scenario.channel", "expected an object");
        check_allowed(*v, "scenario.channel", {"transmittance", "dark_count", "depolarizing"});
        if (const json* t = find(*v, "transmittance")) cfg.channel.transmittance = as_number(*t, "scenario.channel.transmittance");
        if (const json* t = find(*v, "dark_count")) cfg.channel.dark_count = as_number(*t, "scenario.channel.dark_count");
        if (const json* t = find(*v, "depolarizing")) cfg.channel.depolarizing = as_number(*t, "scenario.channel.depolarizing");
    }
    if (const json* v = find(doc, "attack")) {
        if (!v->is_object()) fail("scenario.attack", "expected an object");
        parse_attack(*v, "scenario.attack", cfg);
    }
    if (const json* v = find(doc, "measurer")) {
        const std::string m = as_string(*v, "scenario.measurer");
        if (m == "honest") {
            cfg.measurer = MeasurerModel::Honest;
        } else if (m == "constant-outcome") {
            cfg.measurer = MeasurerModel::ConstantOutcome;
        } else if (m == "wrong-basis") {
            cfg.measurer = MeasurerModel::WrongBasis;
        } else {
            fail("scenario.measurer", "expected \"honest\", \"constant-outcome\" or \"wrong-basis\"");
        }
    }
    if (const json* v = find(doc, "decoy")) {
        if (!v->is_object()) fail("scenario.decoy", "expected an object");
        parse_decoy(*v, "scenario.decoy", cfg);
    }

    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("scenario: ") + e.what());
    }
    return cfg;
}

}  // namespace

// --- TOML subset ---------------------------------------------------------------

namespace {

std::string trim(const std::string& s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::string strip_comment(const std::string& line) {
    bool in_string = false;
    for (size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') in_string = !in_string;
        if (line[i] == '#' && !in_string) return line.substr(0, i);
    }
    return line;
}

json parse_toml_scalar(const std::string& raw, int line_no) {
    const std::string v = trim(raw);
    if (v.empty()) throw ConfigError("toml line " + std::to_string(line_no) + ": empty value");
    if (v.front() == '"') {
        if (v.size() < 2 || v.back() != '"') {
            throw ConfigError("toml line " + std::to_string(line_no) + ": unterminated string");
        }
        return json(v.substr(1, v.size() - 2));
    }
    if (v == "true") return json(true);
    if (v == "false") return json(false);
    try {
        size_t used = 0;
        if (v.find_first_of(".eE") == std::string::npos) {
            const long long i = std::stoll(v, &used);
            if (used == v.size()) return json(i);
        } else {
            const double d = std::stod(v, &used);
            if (used == v.size()) return json(d);
        }
    } catch (const std::exception&) {
        // fall through to the error below
    }
    throw ConfigError("toml line " + std::to_string(line_no) + ": cannot parse value: " + v);
}

json parse_toml_value(const std::string& raw, int line_no) {
    const std::string v = trim(raw);
    if (!v.empty() && v.front() == '[') {
        if (v.back() != ']') throw ConfigError("toml line " + std::to_string(line_no) + ": unterminated array");
        json arr = json::array();
        std::string body = v.substr(1, v.size() - 2);
        std::string current;
        bool in_string = false;
        for (char c : body) {
            if (c == '"') in_string = !in_string;
            if (c == ',' && !in_string) {
                arr.push_back(parse_toml_scalar(current, line_no));
                current.clear();
            } else {
                current += c;
            }
        }
        if (!trim(current).empty()) arr.push_back(parse_toml_scalar(current, line_no));
        return arr;
    }
    return parse_toml_scalar(v, line_no);
}

}  // namespace

nlohmann::json toml_subset_to_json(const std::string& text) {
    json doc = json::object();
    json* section = &doc;
    std::istringstream in(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::string line = trim(strip_comment(raw));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError("toml line " + std::to_string(line_no) + ": bad section header");
            const std::string path = trim(line.substr(1, line.size() - 2));
            if (path.empty()) throw ConfigError("toml line " + std::to_string(line_no) + ": empty section name");
            section = &doc;
            std::istringstream parts(path);
            std::string part;
            while (std::getline(parts, part, '.')) {
                part = trim(part);
                if (part.empty()) throw ConfigError("toml line " + std::to_string(line_no) + ": empty section part");
                section = &(*section)[part];
                if (!section->is_object() && !section->is_null()) {
                    throw ConfigError("toml line " + std::to_string(line_no) + ": section clashes with a value");
                }
                if (section->is_null()) *section = json::object();
            }
            continue;
        }
        const size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("toml line " + std::to_string(line_no) + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) throw ConfigError("toml line " + std::to_string(line_no) + ": empty key");
        (*section)[key] = parse_toml_value(line.substr(eq + 1), line_no);
    }
    return doc;
}

// --- Scenario ------------------------------------------------------------------

Scenario parse_scenario_text(const std::string& text, bool is_toml) {
    json doc;
    if (is_toml) {
        doc = toml_subset_to_json(text);
    } else {
        doc = json::parse(text, nullptr, /*allow_exceptions=*/false);
        if (doc.is_discarded()) throw ConfigError("scenario: invalid JSON");
    }

    Scenario scenario;
    if (const json* out = find(doc, "output")) {
        if (!out->is_object()) fail("scenario.output", "expected an object");
        check_allowed(*out, "scenario.output", {"report", "trace"});
        if (const json* v = find(*out, "report")) scenario.report_path = as_string(*v, "scenario.output.report");
        if (const json* v = find(*out, "trace")) scenario.trace_path = as_string(*v, "scenario.output.trace");
    }
    scenario.protocol = parse_config(doc);
    scenario.echo = doc;
    return scenario;
}

Scenario parse_scenario_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read scenario file: " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    const std::string text = buffer.str();

    bool is_toml = path.size() >= 5 && path.substr(path.size() - 5) == ".toml";
    if (!is_toml) {
        // Sniff: TOML content in files without a .json suffix.
        const std::string t = trim(text);
        if (!t.empty() && t.front() != '{' &&
            !(path.size() >= 5 && path.substr(path.size() - 5) == ".json")) {
            is_toml = true;
        }
    }
    return parse_scenario_text(text, is_toml);
}

nlohmann::json report_to_json(const Scenario& scenario, const SessionReport& report, double wall_seconds) {
    json r;
    r["rounds_total"] = report.rounds_total;
    r["kept_count"] = report.kept_count;
    r["raw_key_bits"] = report.raw_key_bits;
    r["key_source_pulses"] = report.key_source_pulses;
    r["error_sample_count"] = report.error_sample_count;
    r["error_disagreements"] = report.error_disagreements;
    r["empty_detections"] = report.empty_detections;
    r["sift_fraction"] = report.sift_fraction;
    r["qber"] = report.qber ? json(*report.qber) : json(nullptr);
    r["eve_guess_rate"] = report.eve_guess_rate ? json(*report.eve_guess_rate) : json(nullptr);
    r["qubits_per_raw_bit"] = report.qubits_per_raw_bit;
    r["asymptotic_key_rate"] = report.asymptotic_key_rate ? json(*report.asymptotic_key_rate) : json(nullptr);
    r["reference_mdi_qubits_per_bit"] = SessionReport::kReferenceMdiQubitsPerBit;
    r["pnp"] = {{"wrongly_purified", report.pnp_wrongly_purified},
                {"removed_photons", report.pnp_removed_photons}};

    json eve;
    eve["bit_guesses"] = report.eve_bit_guesses;
    eve["bit_correct"] = report.eve_bit_correct;
    eve["operator_guesses"] = report.eve_operator_guesses;
    eve["operator_correct"] = report.eve_operator_correct;
    eve["conclusive"] = report.eve_conclusive;
    eve["conclusive_correct"] = report.eve_conclusive_correct;
    eve["probes_returned"] = report.eve_probes_returned;
    eve["operator_accuracy"] = report.eve_operator_accuracy ? json(*report.eve_operator_accuracy) : json(nullptr);
    eve["conclusive_accuracy"] =
        report.eve_conclusive_accuracy ? json(*report.eve_conclusive_accuracy) : json(nullptr);
    r["eve"] = std::move(eve);

    if (report.decoy) {
        json d;
        json levels = json::array();
        for (const IntensityTally& t : report.decoy->gains.levels) {
            levels.push_back({{"label", t.label},
                              {"mu", t.mu},
                              {"sent", t.sent},
                              {"detected", t.detected},
                              {"gain", t.gain()}});
        }
        d["levels"] = std::move(levels);
        d["bob_decoy_tagged"] = report.decoy->bob_decoy_tagged;
        d["signal_detected"] = report.decoy->signal_detected;
        if (report.decoy->analysis) {
            const DecoyAnalysis& a = *report.decoy->analysis;
            d["analysis"] = {{"y0", a.y0},
                             {"y1_lower_bound", a.y1_lower_bound},
                             {"y1_implied_honest", a.y1_implied_honest},
                             {"consistency_ratio", a.consistency_ratio},
                             {"inconsistency_flag", a.inconsistency_flag}};
        } else {
            d["analysis"] = nullptr;
        }
        r["decoy"] = std::move(d);
    } else {
        r["decoy"] = nullptr;
    }

    json out;
    out["tool"] = {{"name", kToolName}, {"version", kToolVersion}};
    out["wall_clock_seconds"] = wall_seconds;
    out["config"] = scenario.echo;
    out["report"] = std::move(r);
    return out;
}

std::string render_trace_csv(const std::vector<Round>& trace, const OperatorCatalog& catalog) {
    std::ostringstream out;
    out << "index,alice_basis,alice_index,bob_operator,pnp_basis,meas_basis,outcome,verdict,alice_bit,bob_bit\n";
    const auto basis_name = [&](const std::optional<int>& b) -> std::string {
        return b ? catalog.bases()[static_cast<size_t>(*b)].name() : "-";
    };
    const auto opt = [](const std::optional<int>& v) -> std::string {
        return v ? std::to_string(*v) : "-";
    };
    for (const Round& r : trace) {
        // the undelegated run has no encoding operator
        const std::string op = r.bob_operator >= 0 ? catalog.entry(r.bob_operator).label : "-";
        out << r.index << ',' << catalog.bases()[static_cast<size_t>(r.alice_basis)].name() << ','
            << r.alice_index << ',' << op << ',' << basis_name(r.pnp_basis) << ',' << basis_name(r.meas_basis)
            << ',' << opt(r.eve_outcome) << ',' << to_string(r.verdict) << ',' << opt(r.alice_bit) << ','
            << opt(r.bob_bit) << '\n';
    }
    return out.str();
}

std::string render_tables_csv(CatalogKind kind, std::optional<double> theta) {
    const OperatorCatalog catalog = OperatorCatalog::build(kind, theta);
    const CodingMode coding = default_coding(kind);
    std::ostringstream out;
    out << "kind,theta,alice_basis,operator,meas_basis,verdict,bit\n";
    const int nb = static_cast<int>(catalog.bases().size());
    for (int src = 0; src < nb; ++src) {
        for (int op = 0; op < catalog.size(); ++op) {
            const std::optional<int> image = catalog.image(op, src);
            for (int dst = 0; dst < nb; ++dst) {
                out << to_string(kind) << ',' << (kind == CatalogKind::General12 ? std::to_string(catalog.theta()) : "-")
                    << ',' << catalog.bases()[static_cast<size_t>(src)].name() << ','
                    << catalog.entry(op).label << ',' << catalog.bases()[static_cast<size_t>(dst)].name() << ',';
                if (!image) {
                    out << "N,-";
                } else if (*image == dst) {
                    out << "kept," << coding_bit(catalog, coding, catalog.entry(op).label, src, dst);
                } else {
                    out << "discarded,-";
                }
                out << '\n';
            }
        }
    }
    return out.str();
}

nlohmann::json run_discrimination_problem(const nlohmann::json& problem) {
    if (!problem.is_object()) throw ConfigError("problem: expected a top-level object");
    check_allowed(problem, "problem", {"states", "priors"});
    const json* states = find(problem, "states");
    if (!states || !states->is_array() || states->empty()) {
        throw ConfigError("problem.states: expected a non-empty array");
    }

    DiscriminationProblem p;
    for (size_t i = 0; i < states->size(); ++i) {
        const std::string sp = "problem.states[" + std::to_string(i) + "]";
        const json& s = (*states)[i];
        if (!s.is_array() || s.empty()) throw ConfigError(sp + ": expected an array of [re, im] pairs");
        CVec v;
        for (size_t k = 0; k < s.size(); ++k) {
            const json& c = s[k];
            if (!c.is_array() || c.size() != 2 || !c[0].is_number() || !c[1].is_number()) {
                throw ConfigError(sp + "[" + std::to_string(k) + "]: expected [re, im]");
            }
            v.emplace_back(c[0].get<double>(), c[1].get<double>());
        }
        p.states.push_back(std::move(v));
    }
    if (const json* priors = find(problem, "priors")) {
        if (!priors->is_array()) throw ConfigError("problem.priors: expected an array");
        for (const json& v : *priors) {
            if (!v.is_number()) throw ConfigError("problem.priors: expected numbers");
            p.priors.push_back(v.get<double>());
        }
    } else {
        p.priors.assign(p.states.size(), 1.0 / static_cast<double>(p.states.size()));
    }
    try {
        p.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("problem: ") + e.what());
    }

    const MinErrorResult me = min_error(p);
    const UsdResult usd = unambiguous_discrimination(p);

    json out;
    out["tool"] = {{"name", kToolName}, {"version", kToolVersion}};
    out["min_error"] = {{"success", me.success},
                        {"residual", me.residual},
                        {"certified", me.certified},
                        {"iterations", me.iterations},
                        {"povm_valid", me.povm.valid()}};
    if (usd.feasible) {
        out["usd"] = {{"feasible", true},
                      {"overall_conclusive_rate", usd.overall_conclusive_rate},
                      {"per_state_conclusive", usd.conclusive_probability},
                      {"povm_valid", usd.povm.valid()}};
    } else {
        out["usd"] = {{"feasible", false}, {"reason", "states are linearly dependent"}};
    }
    return out;
}

}  // namespace qkd
