#include "qkd/adversary.hpp"

#include <stdexcept>

namespace qkd {

InterceptResendRecord intercept_resend(PureState& signal, const MeasurementBasis& basis, RandomStream& rng) {
    if (signal.num_qubits() != 1) throw std::invalid_argument("intercept-resend expects a single-photon signal");
    const MeasurementOutcome meas = measure_qubit(signal, 0, basis, rng);
    signal = basis.vector(meas.outcome);
    return {basis, meas.outcome};
}

void pna_attach(Pulse& pulse, const std::vector<PureState>& probes) {
    if (pulse.size() + static_cast<int>(probes.size()) > 4) {
        throw std::invalid_argument("exact-mode pulses hold at most 4 photons");
    }
    for (const PureState& p : probes) pulse.photons.push_back({p, Provenance::EveProbe});
}

std::vector<PureState> pna_extract(Pulse& pulse) {
    std::vector<PureState> held;
    std::vector<Photon> rest;
    for (Photon& p : pulse.photons) {
        if (p.origin == Provenance::EveProbe) {
            held.push_back(std::move(p.state));
        } else {
            rest.push_back(std::move(p));
        }
    }
    pulse.photons = std::move(rest);
    return held;
}

PnaDiscriminator::PnaDiscriminator(const OperatorCatalog& catalog, const std::vector<PureState>& probes,
                                   DiscriminationMethod method)
    : method_(method), probe_count_(static_cast<int>(probes.size())), catalog_size_(catalog.size()) {
    if (probes.empty() || probes.size() > 3) throw std::invalid_argument("1 to 3 probes supported");

    std::vector<CVec> candidates;
    candidates.reserve(static_cast<size_t>(catalog.size()));
    for (const CatalogEntry& e : catalog.entries()) {
        PureState out = apply(e.op, probes[0]);
        for (size_t k = 1; k < probes.size(); ++k) out = tensor(out, apply(e.op, probes[k]));
        candidates.push_back(out.amplitudes());
    }

    const DiscriminationProblem problem = uniform_problem(std::move(candidates));
    if (method == DiscriminationMethod::MinError) {
        povm_ = min_error(problem).povm;
    } else {
        const UsdResult usd = unambiguous_discrimination(problem);
        usd_feasible_ = usd.feasible;
        if (usd.feasible) povm_ = usd.povm;
    }
}

PnaGuess PnaDiscriminator::discriminate(const std::vector<PureState>& held, RandomStream& rng) const {
    if (static_cast<int>(held.size()) != probe_count_) {
        throw std::invalid_argument("held probe count does not match the discriminator");
    }
    if (method_ == DiscriminationMethod::Unambiguous && !usd_feasible_) return {std::nullopt};

    PureState joint = held[0];
    for (size_t k = 1; k < held.size(); ++k) joint = tensor(joint, held[k]);
    const int outcome = povm_.sample(joint.amplitudes(), rng);
    if (outcome >= catalog_size_) return {std::nullopt};  // USD inconclusive element
    return {outcome};
}

std::optional<Photon> pns_split(Pulse& pulse, double block_single, RandomStream& rng) {
    if (pulse.size() >= 2) {
        Photon kept = std::move(pulse.photons.back());
        pulse.photons.pop_back();
        return kept;
    }
    if (pulse.size() == 1 && rng.bernoulli(block_single)) {
        pulse.photons.clear();
    }
    return std::nullopt;
}

namespace {

class NoAttack final : public AttackStrategy {
public:
    std::unique_ptr<AttackStrategy> clone() const override { return std::make_unique<NoAttack>(); }
    void on_forward_channel(Pulse&, RandomStream&) override {}
    void on_return_channel(Pulse&, RandomStream&) override {}
    EveRoundRecord classical_phase(const RoundPublicInfo&, RandomStream&) override { return {}; }
};

class InterceptResendAttack final : public AttackStrategy {
public:
    InterceptResendAttack(const OperatorCatalog& catalog, CodingMode coding, std::optional<MeasurementBasis> basis)
        : catalog_(&catalog), coding_(coding), fixed_basis_(std::move(basis)) {}

    std::unique_ptr<AttackStrategy> clone() const override {
        return std::make_unique<InterceptResendAttack>(*this);
    }

    void on_forward_channel(Pulse& pulse, RandomStream& rng) override {
        record_.reset();
        for (Photon& p : pulse.photons) {
            if (p.origin != Provenance::FromAlice) continue;
            const MeasurementBasis basis =
                fixed_basis_ ? *fixed_basis_
                             : catalog_->bases()[rng.uniform_int(static_cast<std::uint32_t>(catalog_->bases().size()))];
            record_ = intercept_resend(p.state, basis, rng);
            break;
        }
    }

    void on_return_channel(Pulse&, RandomStream&) override {}

    EveRoundRecord classical_phase(const RoundPublicInfo& info, RandomStream& rng) override {
        EveRoundRecord rec;
        if (!info.kept || !record_ || !info.outcome || !info.meas_basis) return rec;
        const int basis_index = catalog_->basis_index(record_->basis);
        if (basis_index == info.alice_basis) {
            // Her measurement pinned Alice's state; decode exactly as Alice does.
            rec.bit_guess = decode_with_state(record_->outcome, info);
        }
        if (!rec.bit_guess) rec.bit_guess = static_cast<int>(rng.uniform_int(2));
        return rec;
    }

private:
    std::optional<int> decode_with_state(int alice_index, const RoundPublicInfo& info) const {
        if (coding_ == CodingMode::FlipParityPerCell) return alice_index ^ *info.outcome;
        const std::vector<int> ops =
            consistent_operators(*catalog_, info.alice_basis, alice_index, *info.meas_basis, *info.outcome);
        if (ops.size() != 1) return std::nullopt;
        return coding_bit(*catalog_, coding_, catalog_->entry(ops.front()).label, info.alice_basis,
                          *info.meas_basis);
    }

    const OperatorCatalog* catalog_;
    CodingMode coding_;
    std::optional<MeasurementBasis> fixed_basis_;
    std::optional<InterceptResendRecord> record_;
};

class PnaAttack final : public AttackStrategy {
public:
    PnaAttack(const OperatorCatalog& catalog, CodingMode coding, std::vector<PureState> probes,
              DiscriminationMethod method)
        : catalog_(&catalog),
          coding_(coding),
          probes_(std::move(probes)),
          discriminator_(std::make_shared<PnaDiscriminator>(catalog, probes_, method)) {}

    std::unique_ptr<AttackStrategy> clone() const override { return std::make_unique<PnaAttack>(*this); }

    void on_forward_channel(Pulse& pulse, RandomStream&) override {
        held_.clear();
        pna_attach(pulse, probes_);
    }

    void on_return_channel(Pulse& pulse, RandomStream&) override { held_ = pna_extract(pulse); }

    EveRoundRecord classical_phase(const RoundPublicInfo& info, RandomStream& rng) override {
        EveRoundRecord rec;
        rec.probes_returned = static_cast<int>(held_.size());
        if (held_.size() == probes_.size()) {
            const PnaGuess guess = discriminator_->discriminate(held_, rng);
            rec.conclusive = guess.operator_index.has_value();
            if (guess.operator_index) rec.operator_guess = catalog_->entry(*guess.operator_index).label;
        }
        if (!rec.operator_guess) {
            // Purification stripped the probes (or the measurement was
            // inconclusive): nothing better than a uniform guess.
            rec.operator_guess = catalog_->entry(static_cast<int>(rng.uniform_int(
                static_cast<std::uint32_t>(catalog_->size())))).label;
        }
        rec.bit_guess = bit_from_operator_guess(*rec.operator_guess, info, rng);
        return rec;
    }

private:
    std::optional<int> bit_from_operator_guess(const std::string& label, const RoundPublicInfo& info,
                                               RandomStream& rng) const {
        if (!info.kept || !info.meas_basis) return std::nullopt;
        const int op = catalog_->index_of(label);
        if (catalog_->image(op, info.alice_basis) == std::optional<int>(*info.meas_basis)) {
            return coding_bit(*catalog_, coding_, label, info.alice_basis, *info.meas_basis);
        }
        return static_cast<int>(rng.uniform_int(2));
    }

    const OperatorCatalog* catalog_;
    CodingMode coding_;
    std::vector<PureState> probes_;
    std::shared_ptr<const PnaDiscriminator> discriminator_;  // immutable, shared across clones
    std::vector<PureState> held_;
};

class PnsAttack final : public AttackStrategy {
public:
    explicit PnsAttack(double block_single) : block_single_(block_single) {}

    std::unique_ptr<AttackStrategy> clone() const override { return std::make_unique<PnsAttack>(*this); }

    void on_forward_channel(Pulse& pulse, RandomStream& rng) override {
        (void)pns_split(pulse, block_single_, rng);
    }

    void on_return_channel(Pulse&, RandomStream&) override {}
    EveRoundRecord classical_phase(const RoundPublicInfo&, RandomStream&) override { return {}; }
    bool replaces_channel() const override { return true; }  // Eve forwards on her own lossless line

private:
    double block_single_;
};

}  // namespace

std::unique_ptr<AttackStrategy> make_attack(const AttackSpec& spec, const OperatorCatalog& catalog,
                                            CodingMode coding) {
    switch (spec.kind) {
        case AttackKind::None:
            return std::make_unique<NoAttack>();
        case AttackKind::InterceptResend:
            return std::make_unique<InterceptResendAttack>(catalog, coding, spec.ir_basis);
        case AttackKind::Pna:
            if (spec.pna_probes.empty()) throw std::invalid_argument("pna attack needs probe states");
            return std::make_unique<PnaAttack>(catalog, coding, spec.pna_probes, spec.pna_method);
        case AttackKind::Pns:
            return std::make_unique<PnsAttack>(spec.pns_block_single);
    }
    throw std::logic_error("unreachable");
}

}  // namespace qkd
