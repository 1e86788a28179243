#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qkd/adversary.hpp"
#include "qkd/decoy.hpp"
#include "qkd/opsets.hpp"
#include "qkd/pnp.hpp"

namespace qkd {

// Who picks the measurement basis. The general scheme has Bob send it along
// with the state; the BB84/six-state variants default to the measurement
// party drawing it uniformly.
enum class BasisChooser { PerKindDefault, Eve, Bob };

struct PnpConfig {
    bool enabled = false;
    std::vector<MeasurementBasis> bases;  // empty = protocol bases of the kind
    double gate_fidelity = 1.0;
    ControlPolicy control_policy = ControlPolicy::Random;
};

struct ProtocolConfig {
    CatalogKind kind = CatalogKind::Bb84Four;
    std::optional<double> theta;          // general-12 only
    std::optional<CodingMode> coding;     // default per kind
    std::int64_t rounds = 0;
    std::uint64_t seed = 0;
    std::uint64_t session_id = 0;
    double error_sample_fraction = 0.01;
    BasisChooser basis_chooser = BasisChooser::PerKindDefault;
    bool delegate_measurement = true;     // false = ordinary prepare-measure run, Bob measures himself
    PnpConfig pnp;
    ChannelModel channel;                 // Alice -> Bob leg
    MeasurerModel measurer = MeasurerModel::Honest;
    AttackSpec attack;
    std::optional<IntensitySchedule> decoy;  // practical mode when set
    int threads = 1;

    void validate() const;  // throws std::invalid_argument on inconsistencies
};

enum class SiftVerdict { Keep, DiscardBasis, DiscardPNP, DecoyRound, ErrorSample, Empty };

std::string to_string(SiftVerdict v);

/// Full per-bit transcript. Basis fields are indices into the catalog's basis
/// list; operator is an index into the catalog.
struct Round {
    std::int64_t index = 0;
    int alice_basis = -1;
    int alice_index = -1;
    int bob_operator = -1;
    std::optional<int> pnp_basis;
    std::optional<int> meas_basis;
    std::optional<int> eve_outcome;  // nullopt = empty detection
    SiftVerdict verdict = SiftVerdict::Empty;
    std::optional<int> alice_bit;
    std::optional<int> bob_bit;
};

struct DecoyReport {
    GainYieldStats gains;
    std::optional<DecoyAnalysis> analysis;  // present when the schedule supports the estimator
    std::int64_t bob_decoy_tagged = 0;      // wrongly purified, routed to Bob's decoy bookkeeping
    std::int64_t signal_detected = 0;       // non-decoy pulses that arrived non-empty at Bob
};

struct SessionReport {
    std::int64_t rounds_total = 0;
    std::int64_t kept_count = 0;       // verdict Keep or ErrorSample
    std::int64_t raw_key_bits = 0;     // verdict Keep only
    std::int64_t key_source_pulses = 0;  // non-decoy pulses Alice sent (all rounds in exact mode)
    std::int64_t error_sample_count = 0;
    std::int64_t error_disagreements = 0;
    std::int64_t empty_detections = 0;
    double sift_fraction = 0.0;
    std::optional<double> qber;
    std::optional<double> eve_guess_rate;
    double qubits_per_raw_bit = 0.0;
    std::optional<double> asymptotic_key_rate;
    // Constant for comparison in reports: qubits per raw bit of the standard
    // joint-measurement MDI protocol.
    static constexpr double kReferenceMdiQubitsPerBit = 8.0;

    std::int64_t pnp_wrongly_purified = 0;
    std::int64_t pnp_removed_photons = 0;

    // Adversary bookkeeping.
    std::int64_t eve_bit_guesses = 0;
    std::int64_t eve_bit_correct = 0;
    std::int64_t eve_operator_guesses = 0;
    std::int64_t eve_operator_correct = 0;
    std::int64_t eve_conclusive = 0;
    std::int64_t eve_conclusive_correct = 0;
    std::int64_t eve_probes_returned = 0;
    std::optional<double> eve_operator_accuracy;
    std::optional<double> eve_conclusive_accuracy;

    std::optional<DecoyReport> decoy;
};

// --- Per-step operations (unit-testable pieces of the engine) ----------------

struct AlicePreparation {
    int basis;
    int index;
    PureState state;
};
AlicePreparation alice_prepare(const OperatorCatalog& catalog, RandomStream& rng);

struct BobChoice {
    int op;
    std::optional<int> basis;  // nullopt = deferred to the measurement party
};
BobChoice bob_choose(const OperatorCatalog& catalog, BasisChooser chooser, RandomStream& rng);

// Basis sifting: keep when the operator maps Alice's basis onto the measured one.
SiftVerdict sift(const OperatorCatalog& catalog, int alice_basis, int bob_operator, int meas_basis);

std::optional<int> decode_alice(const Round& round, const OperatorCatalog& catalog, CodingMode coding);
int decode_bob(const Round& round, const OperatorCatalog& catalog, CodingMode coding);

std::optional<double> estimate_qber(const std::vector<Round>& rounds, const OperatorCatalog& catalog,
                                    CodingMode coding);

double binary_entropy(double p);
// sift_fraction * max(0, 1 - 2 h2(qber)); a standard BB84-style estimate, not
// a security proof.
double asymptotic_key_rate(double qber, double sift_fraction);

// Non-decoy source pulses per raw key bit. Throws when the session produced
// no raw key.
double qubits_per_raw_bit(const SessionReport& report);

// Executes the whole session. When `trace` is non-null it receives one Round
// per executed round, ordered by index (memory scales with rounds).
SessionReport run_session(const ProtocolConfig& config, std::vector<Round>* trace = nullptr);

// Resolved helpers shared with the CLI layer.
CodingMode resolved_coding(const ProtocolConfig& config);
OperatorCatalog build_catalog_for(const ProtocolConfig& config);

}  // namespace qkd
