#include <doctest.h>

#include <cmath>
#include <map>
#include <numbers>

#include "qkd/protocol.hpp"
#include "support/oracles.hpp"

using namespace qkd;

namespace {

ProtocolConfig honest(CatalogKind kind, std::int64_t rounds, std::uint64_t seed) {
    ProtocolConfig cfg;
    cfg.kind = kind;
    if (kind == CatalogKind::General12) cfg.theta = std::numbers::pi / 6;
    cfg.rounds = rounds;
    cfg.seed = seed;
    cfg.error_sample_fraction = 0.1;
    return cfg;
}

double binom_sigma(double p, double n) { return std::sqrt(p * (1 - p) / n); }

}  // namespace

TEST_CASE("alice draws uniformly over the legal states") {
    struct Case {
        OperatorCatalog catalog;
        int states;
    };
    std::vector<Case> cases;
    cases.push_back({OperatorCatalog::build(CatalogKind::Bb84Four), 4});
    cases.push_back({OperatorCatalog::build(CatalogKind::SixState24), 6});
    cases.push_back({OperatorCatalog::build(CatalogKind::General12, std::numbers::pi / 6), 4});
    const int n = 60000;
    for (const Case& c : cases) {
        std::map<std::pair<int, int>, int> counts;
        for (int i = 0; i < n; ++i) {
            RandomStream rng(3, static_cast<std::uint64_t>(c.states), static_cast<std::uint64_t>(i));
            const AlicePreparation prep = alice_prepare(c.catalog, rng);
            counts[{prep.basis, prep.index}] += 1;
        }
        CHECK(static_cast<int>(counts.size()) == c.states);
        const double expected = 1.0 / c.states;
        for (const auto& [key, count] : counts) {
            CHECK(std::abs(count / static_cast<double>(n) - expected) < 3 * binom_sigma(expected, n));
        }
    }
}

TEST_CASE("bob basis rule in the general scheme") {
    const OperatorCatalog gen = OperatorCatalog::build(CatalogKind::General12, std::numbers::pi / 6);
    std::map<std::string, std::map<int, int>> basis_counts;
    for (int i = 0; i < 40000; ++i) {
        RandomStream rng(4, 0, static_cast<std::uint64_t>(i));
        const BobChoice c = bob_choose(gen, BasisChooser::Bob, rng);
        REQUIRE(c.basis.has_value());
        basis_counts[gen.entry(c.op).label][*c.basis] += 1;
    }
    // deterministic picks
    for (const char* l : {"X", "Z", "XU", "ZU"}) {
        CHECK(basis_counts[l].size() == 1);
        CHECK(basis_counts[l].count(0) == 1);  // B0
    }
    for (const char* l : {"UX", "UZ", "UXU", "UZU"}) {
        CHECK(basis_counts[l].size() == 1);
        CHECK(basis_counts[l].count(1) == 1);  // B1
    }
    // coin flips for the both-ways operators
    for (const char* l : {"I", "U", "XZ", "UXZ"}) {
        REQUIRE(basis_counts[l].size() == 2);
        const double total = basis_counts[l][0] + basis_counts[l][1];
        CHECK(std::abs(basis_counts[l][0] / total - 0.5) < 3 * binom_sigma(0.5, total));
    }

    // BB84 kinds defer to the measuring party
    const OperatorCatalog bb4 = OperatorCatalog::build(CatalogKind::Bb84Four);
    RandomStream rng(5, 0, 0);
    CHECK_FALSE(bob_choose(bb4, BasisChooser::Eve, rng).basis.has_value());
}

TEST_CASE("sifting follows the basis-image rule") {
    const OperatorCatalog bb4 = OperatorCatalog::build(CatalogKind::Bb84Four);
    // (Z, H, Z): H swaps bases, same basis measured -> discard
    CHECK(sift(bb4, 0, bb4.index_of("H"), 0) == SiftVerdict::DiscardBasis);
    CHECK(sift(bb4, 0, bb4.index_of("H"), 1) == SiftVerdict::Keep);
    CHECK(sift(bb4, 0, bb4.index_of("Z"), 0) == SiftVerdict::Keep);

    const OperatorCatalog six = OperatorCatalog::build(CatalogKind::SixState24);
    CHECK(sift(six, 0, six.index_of("H2X"), 0) == SiftVerdict::Keep);

    const OperatorCatalog gen = OperatorCatalog::build(CatalogKind::General12, std::numbers::pi / 6);
    // ZU only maps B1 -> B0; source B0 is invalid
    CHECK(sift(gen, 0, gen.index_of("ZU"), 0) == SiftVerdict::DiscardBasis);
    CHECK(sift(gen, 1, gen.index_of("ZU"), 0) == SiftVerdict::Keep);
}

TEST_CASE("decoding works out what bob encoded") {
    const OperatorCatalog bb4 = OperatorCatalog::build(CatalogKind::Bb84Four);
    Round r;
    // sent |0>, cell (Z,Z), outcome 1 -> operator X -> bit 1
    r.alice_basis = 0;
    r.alice_index = 0;
    r.meas_basis = 0;
    r.eve_outcome = 1;
    CHECK(decode_alice(r, bb4, CodingMode::FixedPerOperator) == 1);
    // sent |->, cell (X,X), outcome |+> -> operator Z -> bit 0
    r.alice_basis = 1;
    r.alice_index = 1;
    r.meas_basis = 1;
    r.eve_outcome = 0;
    CHECK(decode_alice(r, bb4, CodingMode::FixedPerOperator) == 0);
    // sent |1>, cell (Z,X), outcome |+> -> operator HXZ -> bit 1
    r.alice_basis = 0;
    r.alice_index = 1;
    r.meas_basis = 1;
    r.eve_outcome = 0;
    CHECK(decode_alice(r, bb4, CodingMode::FixedPerOperator) == 1);

    // bob's side needs no quantum information
    r.bob_operator = bb4.index_of("Z");
    r.alice_basis = 0;
    r.meas_basis = 0;
    CHECK(decode_bob(r, bb4, CodingMode::FixedPerOperator) == 0);

    const OperatorCatalog bb8 = OperatorCatalog::build(CatalogKind::Bb84Eight);
    Round r8;
    r8.alice_basis = 0;
    r8.meas_basis = 0;
    r8.bob_operator = bb8.index_of("XZ");
    CHECK(decode_bob(r8, bb8, CodingMode::FlipParityPerCell) == 1);

    const OperatorCatalog six = OperatorCatalog::build(CatalogKind::SixState24);
    Round rs;
    rs.alice_basis = 0;
    rs.meas_basis = 0;
    rs.bob_operator = six.index_of("H2Z");
    CHECK(decode_bob(rs, six, CodingMode::FlipParityPerCell) == 0);
}

TEST_CASE("consistent-set uniqueness over every bb84-4 combination") {
    const OperatorCatalog bb4 = OperatorCatalog::build(CatalogKind::Bb84Four);
    for (int a = 0; a < 2; ++a)
        for (int i = 0; i < 2; ++i)
            for (int m = 0; m < 2; ++m)
                for (int o = 0; o < 2; ++o) CHECK(consistent_operators(bb4, a, i, m, o).size() == 1);
}

TEST_CASE("sift fraction laws") {
    struct Case {
        CatalogKind kind;
        double expected;
    };
    for (const Case& c : {Case{CatalogKind::Bb84Four, 0.5}, Case{CatalogKind::Bb84Eight, 0.5},
                          Case{CatalogKind::SixState24, 1.0 / 3}, Case{CatalogKind::General12, 0.5}}) {
        const SessionReport report = run_session(honest(c.kind, 40000, 31));
        CHECK(std::abs(report.sift_fraction - c.expected) < 3 * binom_sigma(c.expected, 40000));
    }
}

TEST_CASE("honest sessions decode identically on every kept round") {
    for (const CatalogKind kind : {CatalogKind::Bb84Four, CatalogKind::Bb84Eight, CatalogKind::SixState24,
                                   CatalogKind::General12}) {
        const SessionReport report = run_session(honest(kind, 30000, 33));
        REQUIRE(report.qber.has_value());
        CHECK(*report.qber == 0.0);
        CHECK(report.error_disagreements == 0);
    }
}

TEST_CASE("eve's view is uncorrelated with the key in honest sessions") {
    std::vector<Round> trace;
    const SessionReport report = run_session(honest(CatalogKind::Bb84Four, 100000, 35), &trace);
    REQUIRE(report.eve_guess_rate.has_value());
    CHECK(std::abs(*report.eve_guess_rate - 0.5) < 3 * binom_sigma(0.5, static_cast<double>(report.kept_count)));

    // conditioned on everything eve sees: cell (alice basis, meas basis) and outcome
    std::map<std::tuple<int, int, int>, std::pair<std::int64_t, std::int64_t>> table;
    for (const Round& r : trace) {
        if (r.verdict != SiftVerdict::Keep && r.verdict != SiftVerdict::ErrorSample) continue;
        auto& [ones, total] = table[{r.alice_basis, *r.meas_basis, *r.eve_outcome}];
        ones += *r.bob_bit;
        total += 1;
    }
    CHECK(table.size() == 8);
    for (const auto& [key, cell] : table) {
        const auto& [ones, total] = cell;
        CHECK(std::abs(ones / static_cast<double>(total) - 0.5) <
              3 * binom_sigma(0.5, static_cast<double>(total)));
    }
}

TEST_CASE("qber under a depolarizing channel matches the branch enumeration") {
    const OperatorCatalog bb4 = OperatorCatalog::build(CatalogKind::Bb84Four);
    const double p = 0.1;
    const double oracle = oracles::depolarizing_qber(bb4, CodingMode::FixedPerOperator, p);
    CHECK(oracle == doctest::Approx(2 * p / 3).epsilon(1e-12));

    ProtocolConfig cfg = honest(CatalogKind::Bb84Four, 60000, 37);
    cfg.channel.depolarizing = p;
    cfg.error_sample_fraction = 0.5;
    const SessionReport report = run_session(cfg);
    REQUIRE(report.qber.has_value());
    CHECK(std::abs(*report.qber - oracle) <
          3 * binom_sigma(oracle, static_cast<double>(report.error_sample_count)));
}

TEST_CASE("estimate_qber recomputes from the trace") {
    std::vector<Round> trace;
    ProtocolConfig cfg = honest(CatalogKind::Bb84Four, 5000, 39);
    cfg.channel.depolarizing = 0.2;
    const SessionReport report = run_session(cfg, &trace);
    const OperatorCatalog bb4 = OperatorCatalog::build(CatalogKind::Bb84Four);
    const auto recomputed = estimate_qber(trace, bb4, CodingMode::FixedPerOperator);
    REQUIRE(recomputed.has_value());
    CHECK(*recomputed == doctest::Approx(*report.qber).epsilon(1e-12));
    CHECK_FALSE(estimate_qber({}, bb4, CodingMode::FixedPerOperator).has_value());
}

TEST_CASE("asymptotic key rate") {
    CHECK(asymptotic_key_rate(0.0, 0.5) == doctest::Approx(0.5));
    CHECK(asymptotic_key_rate(0.25, 0.5) == doctest::Approx(0.0));
    // direct evaluation of the entropy expression
    const double expected = 0.5 * (1 - 2 * oracles::binary_entropy(0.11));
    CHECK(asymptotic_key_rate(0.11, 0.5) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(expected > 0.0);
    CHECK(expected < 1e-4);
    CHECK_THROWS_AS(asymptotic_key_rate(0.7, 0.5), std::invalid_argument);
}

TEST_CASE("pnp halves the kept fraction and leaves honest sessions clean") {
    ProtocolConfig plain = honest(CatalogKind::Bb84Four, 40000, 41);
    const SessionReport without = run_session(plain);

    ProtocolConfig with_pnp = plain;
    with_pnp.pnp.enabled = true;
    const SessionReport with = run_session(with_pnp);
    REQUIRE(with.qber.has_value());
    CHECK(*with.qber == 0.0);
    const double ratio = with.sift_fraction / without.sift_fraction;
    CHECK(std::abs(ratio - 0.5) < 0.02);

    // six-state: three purification bases -> one third
    ProtocolConfig six = honest(CatalogKind::SixState24, 40000, 42);
    const SessionReport six_plain = run_session(six);
    six.pnp.enabled = true;
    const SessionReport six_pnp = run_session(six);
    CHECK(std::abs(six_pnp.sift_fraction / six_plain.sift_fraction - 1.0 / 3) < 0.02);
}

TEST_CASE("qber decreases as the copy gate improves") {
    double previous = 1.0;
    for (const double fidelity : {0.9, 0.95, 0.99, 1.0}) {
        ProtocolConfig cfg = honest(CatalogKind::Bb84Four, 60000, 43);
        cfg.pnp.enabled = true;
        cfg.pnp.gate_fidelity = fidelity;
        cfg.error_sample_fraction = 0.5;
        const SessionReport report = run_session(cfg);
        REQUIRE(report.qber.has_value());
        const double sigma = binom_sigma(std::max(*report.qber, 0.005),
                                         static_cast<double>(report.error_sample_count));
        CHECK(*report.qber <= previous + 3 * sigma);
        previous = *report.qber;
        if (fidelity == 1.0) CHECK(*report.qber == 0.0);
    }
}

TEST_CASE("ordinary run without delegation keeps half and needs 2 qubits per bit") {
    ProtocolConfig cfg = honest(CatalogKind::Bb84Four, 60000, 44);
    cfg.delegate_measurement = false;
    cfg.error_sample_fraction = 0.01;
    const SessionReport report = run_session(cfg);
    CHECK(std::abs(report.sift_fraction - 0.5) < 3 * binom_sigma(0.5, 60000));
    CHECK(std::abs(report.qubits_per_raw_bit - 2.0 / 0.99) < 0.05);
    REQUIRE(report.qber.has_value());
    CHECK(*report.qber == 0.0);
}

TEST_CASE("thread count does not change the results") {
    ProtocolConfig cfg = honest(CatalogKind::SixState24, 20000, 45);
    cfg.pnp.enabled = true;
    std::vector<Round> trace1, trace4;
    const SessionReport r1 = run_session(cfg, &trace1);
    cfg.threads = 4;
    const SessionReport r4 = run_session(cfg, &trace4);
    CHECK(r1.kept_count == r4.kept_count);
    CHECK(r1.raw_key_bits == r4.raw_key_bits);
    CHECK(r1.error_sample_count == r4.error_sample_count);
    CHECK(r1.qber == r4.qber);
    CHECK(r1.pnp_wrongly_purified == r4.pnp_wrongly_purified);
    REQUIRE(trace1.size() == trace4.size());
    for (size_t i = 0; i < trace1.size(); ++i) {
        CHECK(trace1[i].verdict == trace4[i].verdict);
        CHECK(trace1[i].bob_operator == trace4[i].bob_operator);
        CHECK(trace1[i].eve_outcome == trace4[i].eve_outcome);
    }

    // practical mode: per-lane gain tallies merge to the same totals
    ProtocolConfig practical = honest(CatalogKind::Bb84Four, 50000, 46);
    practical.pnp.enabled = true;
    practical.decoy = IntensitySchedule{
        {{"signal", 0.6, 0.5}, {"decoy", 0.3, 0.3}, {"vacuum", 0.0, 0.2}}};
    const SessionReport p1 = run_session(practical);
    practical.threads = 3;
    const SessionReport p3 = run_session(practical);
    REQUIRE(p1.decoy.has_value());
    REQUIRE(p3.decoy.has_value());
    for (size_t i = 0; i < p1.decoy->gains.levels.size(); ++i) {
        CHECK(p1.decoy->gains.levels[i].sent == p3.decoy->gains.levels[i].sent);
        CHECK(p1.decoy->gains.levels[i].detected == p3.decoy->gains.levels[i].detected);
    }
    CHECK(p1.decoy->bob_decoy_tagged == p3.decoy->bob_decoy_tagged);
    CHECK(p1.key_source_pulses == p3.key_source_pulses);
}

TEST_CASE("config validation rejects inconsistencies") {
    ProtocolConfig cfg = honest(CatalogKind::Bb84Four, 1000, 46);
    cfg.error_sample_fraction = 0.0;
    CHECK_THROWS_AS(run_session(cfg), std::invalid_argument);

    cfg = honest(CatalogKind::General12, 1000, 47);
    cfg.theta.reset();
    CHECK_THROWS_AS(run_session(cfg), std::invalid_argument);

    cfg = honest(CatalogKind::Bb84Four, 1000, 48);
    cfg.attack.kind = AttackKind::Pna;  // no probes
    CHECK_THROWS_AS(run_session(cfg), std::invalid_argument);

    cfg = honest(CatalogKind::Bb84Four, 1000, 49);
    cfg.attack.kind = AttackKind::Pns;  // pns needs practical mode
    CHECK_THROWS_AS(run_session(cfg), std::invalid_argument);

    cfg = honest(CatalogKind::Bb84Four, 1000, 50);
    cfg.pnp.enabled = true;
    cfg.pnp.bases = {MeasurementBasis::y()};  // not a protocol basis for bb84
    CHECK_THROWS_AS(run_session(cfg), std::invalid_argument);
}
