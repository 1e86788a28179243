#include "qkd/protocol.hpp"

#include <cmath>
#include <stdexcept>
#include <thread>

namespace qkd {

namespace {

std::vector<MeasurementBasis> resolved_pnp_bases(const ProtocolConfig& config, const OperatorCatalog& catalog) {
    if (!config.pnp.enabled) return {};
    if (config.pnp.bases.empty()) return catalog.bases();
    for (const MeasurementBasis& b : config.pnp.bases) {
        if (catalog.basis_index(b) < 0) {
            throw std::invalid_argument("pnp basis " + b.name() + " is not a protocol basis");
        }
    }
    return config.pnp.bases;
}

BasisChooser resolved_chooser(const ProtocolConfig& config) {
    if (config.basis_chooser != BasisChooser::PerKindDefault) return config.basis_chooser;
    return config.kind == CatalogKind::General12 ? BasisChooser::Bob : BasisChooser::Eve;
}

struct Tally {
    std::int64_t kept = 0, raw = 0, err_samples = 0, err_disagree = 0, empty = 0;
    std::int64_t pnp_wrong = 0, pnp_removed = 0;
    std::int64_t eve_bit_guesses = 0, eve_bit_correct = 0;
    std::int64_t eve_op_guesses = 0, eve_op_correct = 0;
    std::int64_t eve_conclusive = 0, eve_conclusive_correct = 0;
    std::int64_t probes_returned = 0;
    std::int64_t naive_guesses = 0, naive_correct = 0;
    std::int64_t signal_sent = 0, signal_detected = 0, bob_decoy_tagged = 0;
    GainYieldStats gains;

    void merge(const Tally& o) {
        kept += o.kept;
        raw += o.raw;
        err_samples += o.err_samples;
        err_disagree += o.err_disagree;
        empty += o.empty;
        pnp_wrong += o.pnp_wrong;
        pnp_removed += o.pnp_removed;
        eve_bit_guesses += o.eve_bit_guesses;
        eve_bit_correct += o.eve_bit_correct;
        eve_op_guesses += o.eve_op_guesses;
        eve_op_correct += o.eve_op_correct;
        eve_conclusive += o.eve_conclusive;
        eve_conclusive_correct += o.eve_conclusive_correct;
        probes_returned += o.probes_returned;
        naive_guesses += o.naive_guesses;
        naive_correct += o.naive_correct;
        signal_sent += o.signal_sent;
        signal_detected += o.signal_detected;
        bob_decoy_tagged += o.bob_decoy_tagged;
        gains.merge(o.gains);
    }
};

struct EngineContext {
    const ProtocolConfig* config;
    OperatorCatalog catalog;
    CodingMode coding;
    BasisChooser chooser;
    std::vector<MeasurementBasis> pnp_bases;
    int signal_level = -1;  // index into the decoy schedule, when practical
};

GainYieldStats empty_gains(const IntensitySchedule& schedule) {
    GainYieldStats stats;
    for (const IntensityLevel& l : schedule.levels) {
        IntensityTally t;
        t.label = l.label;
        t.mu = l.mu;
        t.truth_sent_by_n.assign(9, 0);
        t.truth_detected_by_n.assign(9, 0);
        stats.levels.push_back(std::move(t));
    }
    return stats;
}

void tally_by_n(std::vector<std::int64_t>& buckets, int n) {
    const size_t slot = std::min<size_t>(static_cast<size_t>(n), buckets.size() - 1);
    buckets[slot] += 1;
}

// Ordinary prepare-measure round: no delegation, Bob measures in a random
// protocol basis himself, bits are the state indices.
Round run_round_undelegated(const EngineContext& ctx, Tally& tally, std::int64_t index) {
    const ProtocolConfig& cfg = *ctx.config;
    RandomStream rng(cfg.seed, cfg.session_id, static_cast<std::uint64_t>(index));

    Round r;
    r.index = index;
    const AlicePreparation prep = alice_prepare(ctx.catalog, rng);
    r.alice_basis = prep.basis;
    r.alice_index = prep.index;

    Pulse pulse;
    pulse.photons.push_back({prep.state, Provenance::FromAlice});
    transmit(pulse, cfg.channel, rng);
    if (pulse.empty()) {
        r.verdict = SiftVerdict::Empty;
        tally.empty += 1;
        return r;
    }

    const int nb = static_cast<int>(ctx.catalog.bases().size());
    const int bob_basis = static_cast<int>(rng.uniform_int(static_cast<std::uint32_t>(nb)));
    r.meas_basis = bob_basis;
    const MeasurementOutcome meas =
        measure_qubit(pulse.photons.front().state, 0, ctx.catalog.bases()[static_cast<size_t>(bob_basis)], rng);
    r.eve_outcome = meas.outcome;

    if (bob_basis != prep.basis) {
        r.verdict = SiftVerdict::DiscardBasis;
        return r;
    }
    r.alice_bit = prep.index;
    r.bob_bit = meas.outcome;
    tally.kept += 1;
    if (rng.bernoulli(cfg.error_sample_fraction)) {
        r.verdict = SiftVerdict::ErrorSample;
        tally.err_samples += 1;
        if (*r.alice_bit != *r.bob_bit) tally.err_disagree += 1;
    } else {
        r.verdict = SiftVerdict::Keep;
        tally.raw += 1;
    }
    return r;
}

Round run_round(const EngineContext& ctx, AttackStrategy& attack, Tally& tally, std::int64_t index) {
    const ProtocolConfig& cfg = *ctx.config;
    if (!cfg.delegate_measurement) return run_round_undelegated(ctx, tally, index);

    RandomStream rng(cfg.seed, cfg.session_id, static_cast<std::uint64_t>(index));

    Round r;
    r.index = index;

    // Alice's turn.
    const AlicePreparation prep = alice_prepare(ctx.catalog, rng);
    r.alice_basis = prep.basis;
    r.alice_index = prep.index;

    Pulse pulse;
    int intensity_level = -1;
    if (cfg.decoy) {
        intensity_level = cfg.decoy->pick(rng);
        pulse.intensity_label = intensity_level;
        const IntensityLevel& level = cfg.decoy->levels[static_cast<size_t>(intensity_level)];
        pulse.intensity = level.mu;
        const int n = sample_photon_number(level.mu, rng);
        for (int k = 0; k < n; ++k) pulse.photons.push_back({prep.state, Provenance::FromAlice});
        IntensityTally& t = tally.gains.levels[static_cast<size_t>(intensity_level)];
        t.sent += 1;
        tally_by_n(t.truth_sent_by_n, n);
        if (intensity_level == ctx.signal_level) tally.signal_sent += 1;
    } else {
        pulse.photons.push_back({prep.state, Provenance::FromAlice});
    }
    const int true_photon_number = pulse.size();

    // Forward channel with the adversary on the line.
    attack.on_forward_channel(pulse, rng);
    if (!attack.replaces_channel()) transmit(pulse, cfg.channel, rng);

    // Bob's turn: purification, then the encoding operator.
    Pulse outgoing;
    bool bob_detected = !pulse.empty();
    if (cfg.pnp.enabled) {
        const int pick = static_cast<int>(rng.uniform_int(static_cast<std::uint32_t>(ctx.pnp_bases.size())));
        const MeasurementBasis& pnp_basis = ctx.pnp_bases[static_cast<size_t>(pick)];
        r.pnp_basis = ctx.catalog.basis_index(pnp_basis);
        if (!bob_detected && cfg.channel.dark_count > 0.0 && rng.bernoulli(cfg.channel.dark_count)) {
            // Dark count at the emptiness check: the copy gate ran on vacuum,
            // the ancilla leaves unchanged.
            outgoing.photons.push_back({pnp_basis.vector(0), Provenance::BobAncilla});
            bob_detected = true;
        } else if (bob_detected) {
            const PnpResult res =
                purify(photon_states(pulse), pnp_basis, rng, cfg.pnp.gate_fidelity, cfg.pnp.control_policy);
            tally.pnp_removed += res.removed_count;
            outgoing.photons.push_back({*res.output_photon, Provenance::BobAncilla});
        }
    } else {
        outgoing = std::move(pulse);
    }
    if (cfg.decoy && bob_detected) {
        IntensityTally& t = tally.gains.levels[static_cast<size_t>(intensity_level)];
        t.detected += 1;
        tally_by_n(t.truth_detected_by_n, true_photon_number);
        if (intensity_level == ctx.signal_level) tally.signal_detected += 1;
    }

    const BobChoice choice = bob_choose(ctx.catalog, ctx.chooser, rng);
    r.bob_operator = choice.op;
    for (Photon& p : outgoing.photons) p.state = apply(ctx.catalog.entry(choice.op).op, p.state);

    // Return channel; the adversary may strip her probes here.
    attack.on_return_channel(outgoing, rng);

    // Measurement party.
    std::optional<int> meas_basis = choice.basis;
    if (!outgoing.empty()) {
        const int nb = static_cast<int>(ctx.catalog.bases().size());
        if (!meas_basis) meas_basis = static_cast<int>(rng.uniform_int(static_cast<std::uint32_t>(nb)));
        r.meas_basis = meas_basis;
        const MeasurementBasis& basis = ctx.catalog.bases()[static_cast<size_t>(*meas_basis)];
        switch (cfg.measurer) {
            case MeasurerModel::Honest:
                r.eve_outcome = measure_qubit(outgoing.photons.front().state, 0, basis, rng).outcome;
                break;
            case MeasurerModel::ConstantOutcome:
                r.eve_outcome = 0;
                break;
            case MeasurerModel::WrongBasis: {
                const MeasurementBasis& actual =
                    ctx.catalog.bases()[static_cast<size_t>((*meas_basis + 1) % nb)];
                r.eve_outcome = measure_qubit(outgoing.photons.front().state, 0, actual, rng).outcome;
                break;
            }
        }
    }

    // Sifting.
    const std::optional<int> image = ctx.catalog.image(choice.op, prep.basis);
    const bool is_decoy_round = cfg.decoy && intensity_level != ctx.signal_level;
    if (!r.eve_outcome) {
        r.verdict = SiftVerdict::Empty;
        tally.empty += 1;
    } else if (is_decoy_round) {
        r.verdict = SiftVerdict::DecoyRound;
    } else if (cfg.pnp.enabled && r.pnp_basis != std::optional<int>(prep.basis)) {
        r.verdict = SiftVerdict::DiscardPNP;
        tally.pnp_wrong += 1;
        if (cfg.decoy) tally.bob_decoy_tagged += 1;
    } else if (!image || *image != *r.meas_basis) {
        r.verdict = SiftVerdict::DiscardBasis;
    } else {
        tally.kept += 1;
        r.bob_bit = decode_bob(r, ctx.catalog, ctx.coding);
        r.alice_bit = decode_alice(r, ctx.catalog, ctx.coding);
        if (rng.bernoulli(cfg.error_sample_fraction)) {
            r.verdict = SiftVerdict::ErrorSample;
            tally.err_samples += 1;
            if (!r.alice_bit || *r.alice_bit != *r.bob_bit) tally.err_disagree += 1;
        } else {
            r.verdict = SiftVerdict::Keep;
            tally.raw += 1;
        }
        tally.naive_guesses += 1;
        if (*r.eve_outcome == *r.bob_bit) tally.naive_correct += 1;
    }

    // Adversary's classical phase.
    RoundPublicInfo info;
    info.alice_basis = prep.basis;
    info.announced_image = image;
    info.pnp_basis = r.pnp_basis;
    info.meas_basis = r.meas_basis;
    info.outcome = r.eve_outcome;
    info.kept = r.verdict == SiftVerdict::Keep || r.verdict == SiftVerdict::ErrorSample;
    const EveRoundRecord rec = attack.classical_phase(info, rng);
    tally.probes_returned += rec.probes_returned;
    if (rec.operator_guess) {
        tally.eve_op_guesses += 1;
        const bool correct = *rec.operator_guess == ctx.catalog.entry(choice.op).label;
        if (correct) tally.eve_op_correct += 1;
        if (rec.conclusive) {
            tally.eve_conclusive += 1;
            if (correct) tally.eve_conclusive_correct += 1;
        }
    }
    if (rec.bit_guess && info.kept && r.bob_bit) {
        tally.eve_bit_guesses += 1;
        if (*rec.bit_guess == *r.bob_bit) tally.eve_bit_correct += 1;
    }
    return r;
}

}  // namespace

void ProtocolConfig::validate() const {
    if (rounds <= 0) throw std::invalid_argument("rounds must be positive");
    if (!(error_sample_fraction > 0.0 && error_sample_fraction < 1.0)) {
        throw std::invalid_argument("error_sample_fraction must lie in (0, 1)");
    }
    if (kind == CatalogKind::General12 && !theta) throw std::invalid_argument("general-12 requires theta");
    if (kind != CatalogKind::General12 && theta) throw std::invalid_argument("theta only applies to general-12");
    if (coding == CodingMode::FixedPerOperator && kind != CatalogKind::Bb84Four) {
        throw std::invalid_argument("fixed-per-operator coding is only defined for bb84-4");
    }
    channel.validate();
    if (threads < 1) throw std::invalid_argument("threads must be >= 1");
    if (!(pnp.gate_fidelity > 0.0 && pnp.gate_fidelity <= 1.0)) {
        throw std::invalid_argument("pnp gate fidelity must lie in (0, 1]");
    }
    for (size_t i = 0; i < pnp.bases.size(); ++i) {
        for (size_t j = i + 1; j < pnp.bases.size(); ++j) {
            if (pnp.bases[i] == pnp.bases[j]) throw std::invalid_argument("duplicate pnp basis");
        }
    }
    if (attack.kind == AttackKind::Pna) {
        if (decoy) throw std::invalid_argument("pna attack runs in exact mode, not with a decoy schedule");
        if (attack.pna_probes.empty() || attack.pna_probes.size() > 3) {
            throw std::invalid_argument("pna attack supports 1 to 3 probe photons");
        }
    }
    if (attack.kind == AttackKind::Pns && !decoy) {
        throw std::invalid_argument("pns attack needs practical (decoy) mode");
    }
    if (decoy) {
        decoy->validate();
        if (decoy->index_of("signal") < 0) throw std::invalid_argument("decoy schedule needs a signal intensity");
    }
    if (!delegate_measurement && (pnp.enabled || attack.kind != AttackKind::None || decoy)) {
        throw std::invalid_argument("the undelegated run supports neither pnp, attacks nor decoy schedules");
    }
}

std::string to_string(SiftVerdict v) {
    switch (v) {
        case SiftVerdict::Keep: return "keep";
        case SiftVerdict::DiscardBasis: return "discard-basis";
        case SiftVerdict::DiscardPNP: return "discard-pnp";
        case SiftVerdict::DecoyRound: return "decoy-round";
        case SiftVerdict::ErrorSample: return "error-sample";
        case SiftVerdict::Empty: return "empty";
    }
    return "?";
}

AlicePreparation alice_prepare(const OperatorCatalog& catalog, RandomStream& rng) {
    const std::uint32_t nb = static_cast<std::uint32_t>(catalog.bases().size());
    const int basis = static_cast<int>(rng.uniform_int(nb));
    const int index = static_cast<int>(rng.uniform_int(2));
    return {basis, index, catalog.bases()[static_cast<size_t>(basis)].vector(index)};
}

BobChoice bob_choose(const OperatorCatalog& catalog, BasisChooser chooser, RandomStream& rng) {
    const int op = static_cast<int>(rng.uniform_int(static_cast<std::uint32_t>(catalog.size())));
    if (chooser != BasisChooser::Bob) return {op, std::nullopt};
    const std::vector<int>& targets = catalog.valid_targets(op);
    if (targets.empty()) return {op, std::nullopt};
    return {op, targets[rng.uniform_int(static_cast<std::uint32_t>(targets.size()))]};
}

SiftVerdict sift(const OperatorCatalog& catalog, int alice_basis, int bob_operator, int meas_basis) {
    const std::optional<int> image = catalog.image(bob_operator, alice_basis);
    return image == std::optional<int>(meas_basis) ? SiftVerdict::Keep : SiftVerdict::DiscardBasis;
}

std::optional<int> decode_alice(const Round& round, const OperatorCatalog& catalog, CodingMode coding) {
    if (!round.meas_basis || !round.eve_outcome) return std::nullopt;
    if (coding == CodingMode::FlipParityPerCell) {
        // The kept cell fixes index arithmetic: outcome = state index xor parity.
        return round.alice_index ^ *round.eve_outcome;
    }
    const std::vector<int> ops = consistent_operators(catalog, round.alice_basis, round.alice_index,
                                                      *round.meas_basis, *round.eve_outcome);
    if (ops.size() != 1) return std::nullopt;  // inconsistent under noise; flagged by the caller
    return coding_bit(catalog, coding, catalog.entry(ops.front()).label, round.alice_basis, *round.meas_basis);
}

int decode_bob(const Round& round, const OperatorCatalog& catalog, CodingMode coding) {
    if (!round.meas_basis) throw std::invalid_argument("decode_bob needs a kept round");
    return coding_bit(catalog, coding, catalog.entry(round.bob_operator).label, round.alice_basis,
                      *round.meas_basis);
}

std::optional<double> estimate_qber(const std::vector<Round>& rounds, const OperatorCatalog& catalog,
                                    CodingMode coding) {
    std::int64_t samples = 0, disagree = 0;
    for (const Round& r : rounds) {
        if (r.verdict != SiftVerdict::ErrorSample) continue;
        ++samples;
        const std::optional<int> a = decode_alice(r, catalog, coding);
        const int b = decode_bob(r, catalog, coding);
        if (!a || *a != b) ++disagree;
    }
    if (samples == 0) return std::nullopt;
    return static_cast<double>(disagree) / static_cast<double>(samples);
}

double binary_entropy(double p) {
    if (p <= 0.0 || p >= 1.0) return 0.0;
    return -p * std::log2(p) - (1.0 - p) * std::log2(1.0 - p);
}

double asymptotic_key_rate(double qber, double sift_fraction) {
    if (qber < 0.0 || qber > 0.5) throw std::invalid_argument("qber must lie in [0, 0.5]");
    return sift_fraction * std::max(0.0, 1.0 - 2.0 * binary_entropy(qber));
}

double qubits_per_raw_bit(const SessionReport& report) {
    if (report.raw_key_bits <= 0) throw std::invalid_argument("session produced no raw key bits");
    return static_cast<double>(report.key_source_pulses) / static_cast<double>(report.raw_key_bits);
}

CodingMode resolved_coding(const ProtocolConfig& config) {
    return config.coding ? *config.coding : default_coding(config.kind);
}

OperatorCatalog build_catalog_for(const ProtocolConfig& config) {
    return OperatorCatalog::build(config.kind, config.theta);
}

SessionReport run_session(const ProtocolConfig& config, std::vector<Round>* trace) {
    config.validate();

    EngineContext ctx;
    ctx.config = &config;
    ctx.catalog = build_catalog_for(config);
    ctx.coding = resolved_coding(config);
    ctx.chooser = resolved_chooser(config);
    ctx.pnp_bases = resolved_pnp_bases(config, ctx.catalog);
    if (config.decoy) ctx.signal_level = config.decoy->index_of("signal");

    const std::unique_ptr<AttackStrategy> prototype = make_attack(config.attack, ctx.catalog, ctx.coding);

    if (trace) trace->resize(static_cast<size_t>(config.rounds));

    const int lanes = static_cast<int>(std::min<std::int64_t>(config.threads, std::max<std::int64_t>(1, config.rounds)));
    std::vector<Tally> tallies(static_cast<size_t>(lanes));
    if (config.decoy) {
        for (Tally& t : tallies) t.gains = empty_gains(*config.decoy);
    }

    const auto run_lane = [&](int lane) {
        std::unique_ptr<AttackStrategy> attack = prototype->clone();
        Tally& tally = tallies[static_cast<size_t>(lane)];
        for (std::int64_t i = lane; i < config.rounds; i += lanes) {
            const Round r = run_round(ctx, *attack, tally, i);
            if (trace) (*trace)[static_cast<size_t>(i)] = r;
        }
    };

    if (lanes == 1) {
        run_lane(0);
    } else {
        std::vector<std::thread> workers;
        workers.reserve(static_cast<size_t>(lanes));
        for (int lane = 0; lane < lanes; ++lane) workers.emplace_back(run_lane, lane);
        for (std::thread& w : workers) w.join();
    }

    Tally total;
    if (config.decoy) total.gains = empty_gains(*config.decoy);
    for (const Tally& t : tallies) total.merge(t);

    SessionReport report;
    report.rounds_total = config.rounds;
    report.kept_count = total.kept;
    report.raw_key_bits = total.raw;
    report.error_sample_count = total.err_samples;
    report.error_disagreements = total.err_disagree;
    report.empty_detections = total.empty;
    report.sift_fraction = static_cast<double>(total.kept) / static_cast<double>(config.rounds);
    if (total.err_samples > 0) {
        report.qber = static_cast<double>(total.err_disagree) / static_cast<double>(total.err_samples);
    }
    report.pnp_wrongly_purified = total.pnp_wrong;
    report.pnp_removed_photons = total.pnp_removed;

    report.key_source_pulses = config.decoy ? total.signal_sent : config.rounds;
    if (total.raw > 0) report.qubits_per_raw_bit = qubits_per_raw_bit(report);
    if (report.qber) report.asymptotic_key_rate = asymptotic_key_rate(*report.qber, report.sift_fraction);

    if (config.attack.kind != AttackKind::None) {
        if (total.eve_bit_guesses > 0) {
            report.eve_guess_rate =
                static_cast<double>(total.eve_bit_correct) / static_cast<double>(total.eve_bit_guesses);
        }
    } else if (total.naive_guesses > 0) {
        report.eve_guess_rate =
            static_cast<double>(total.naive_correct) / static_cast<double>(total.naive_guesses);
    }
    report.eve_bit_guesses = total.eve_bit_guesses;
    report.eve_bit_correct = total.eve_bit_correct;
    report.eve_operator_guesses = total.eve_op_guesses;
    report.eve_operator_correct = total.eve_op_correct;
    report.eve_conclusive = total.eve_conclusive;
    report.eve_conclusive_correct = total.eve_conclusive_correct;
    report.eve_probes_returned = total.probes_returned;
    if (total.eve_op_guesses > 0) {
        report.eve_operator_accuracy =
            static_cast<double>(total.eve_op_correct) / static_cast<double>(total.eve_op_guesses);
    }
    if (total.eve_conclusive > 0) {
        report.eve_conclusive_accuracy =
            static_cast<double>(total.eve_conclusive_correct) / static_cast<double>(total.eve_conclusive);
    }

    if (config.decoy) {
        DecoyReport dr;
        dr.gains = std::move(total.gains);
        dr.bob_decoy_tagged = total.bob_decoy_tagged;
        dr.signal_detected = total.signal_detected;
        if (config.decoy->index_of("decoy") >= 0 && config.decoy->index_of("vacuum") >= 0) {
            try {
                dr.analysis = analyze_decoy(dr.gains);
            } catch (const std::invalid_argument&) {
                // insufficient counts; leave the analysis empty
            }
        }
        report.decoy = std::move(dr);
    }
    return report;
}

}  // namespace qkd
