#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "qkd/discrimination.hpp"
#include "qkd/opsets.hpp"
#include "qkd/pulse.hpp"

namespace qkd {

enum class AttackKind { None, InterceptResend, Pna, Pns };
enum class DiscriminationMethod { MinError, Unambiguous };

// Misbehavior of the measurement party itself: classical lying and basis
// deviation (general entangling attacks by the measurer are out of scope).
enum class MeasurerModel { Honest, ConstantOutcome, WrongBasis };

struct AttackSpec {
    AttackKind kind = AttackKind::None;
    // intercept-resend: fixed basis, or nullopt for a fresh random basis per round
    std::optional<MeasurementBasis> ir_basis;
    // photon-number-adding
    std::vector<PureState> pna_probes;
    DiscriminationMethod pna_method = DiscriminationMethod::Unambiguous;
    // photon-number-splitting
    double pns_block_single = 1.0;
};

// Everything the adversary may read: the public announcements of one round.
struct RoundPublicInfo {
    int alice_basis = -1;
    std::optional<int> announced_image;
    std::optional<int> pnp_basis;
    std::optional<int> meas_basis;
    std::optional<int> outcome;
    bool kept = false;
};

struct EveRoundRecord {
    std::optional<std::string> operator_guess;
    bool conclusive = false;
    std::optional<int> bit_guess;
    int probes_returned = 0;
};

/// An eavesdropping strategy plugged into the round engine. Strategies receive
/// only in-transit quantum signals and public announcements; per-round state is
/// internal, so the engine clones one instance per concurrent lane.
class AttackStrategy {
public:
    virtual ~AttackStrategy() = default;
    virtual std::unique_ptr<AttackStrategy> clone() const = 0;

    // Alice -> Bob leg.
    virtual void on_forward_channel(Pulse& pulse, RandomStream& rng) = 0;
    // Bob -> measurement leg.
    virtual void on_return_channel(Pulse& pulse, RandomStream& rng) = 0;
    // Classical phase; called once per round after announcements.
    virtual EveRoundRecord classical_phase(const RoundPublicInfo& info, RandomStream& rng) = 0;
    // True when the strategy supplies its own (lossless) line, replacing
    // the configured channel model.
    virtual bool replaces_channel() const { return false; }
};

std::unique_ptr<AttackStrategy> make_attack(const AttackSpec& spec, const OperatorCatalog& catalog,
                                            CodingMode coding);

// --- Building blocks (also used directly by tests) ---------------------------

struct InterceptResendRecord {
    MeasurementBasis basis;
    int outcome;
};

// Measure the signal in the given basis and resend the matching eigenstate.
InterceptResendRecord intercept_resend(PureState& signal, const MeasurementBasis& basis, RandomStream& rng);

// Append Eve's tagged probe photons to the signal pulse (exact-mode cap: 4 photons total).
void pna_attach(Pulse& pulse, const std::vector<PureState>& probes);

// Split Eve's probes back out by provenance tag; the pulse keeps the rest.
std::vector<PureState> pna_extract(Pulse& pulse);

struct PnaGuess {
    std::optional<int> operator_index;  // nullopt = inconclusive
};

/// Discriminator for the probe outputs of a catalog: candidates are
/// (T x ... x T) applied to the probe product, one per operator.
class PnaDiscriminator {
public:
    PnaDiscriminator(const OperatorCatalog& catalog, const std::vector<PureState>& probes,
                     DiscriminationMethod method);

    // Identify the operator that produced the held probe outputs.
    PnaGuess discriminate(const std::vector<PureState>& held, RandomStream& rng) const;

    bool usd_feasible() const { return usd_feasible_; }
    DiscriminationMethod method() const { return method_; }

private:
    DiscriminationMethod method_;
    int probe_count_;
    Povm povm_;
    bool usd_feasible_ = false;
    int catalog_size_;
};

// Practical-mode splitting: Eve stores one photon of any multi-photon pulse
// and forwards the rest; single-photon pulses are blocked with the given
// probability to mask line loss.
std::optional<Photon> pns_split(Pulse& pulse, double block_single, RandomStream& rng);

}  // namespace qkd
