#pragma once

#include <optional>
#include <vector>

#include "qkd/pulse.hpp"
#include "qkd/qmath.hpp"

namespace qkd {

enum class CopyGateLabel { C0, CPlus };

/// One of the two copy (C-NOT) gates: C0 copies in the computational basis
/// (|0>|0> -> |0>|0>, |1>|0> -> |1>|1>), C+ in the diagonal basis
/// (|+>|+> -> |+>|+>, |->|+> -> |->|->). Qubit 0 is the control.
struct CopyGate {
    CopyGateLabel label;
    Unitary matrix;      // 4x4
    PureState ancilla_source;  // fresh target state the copy expects
};

CopyGate copy_gate(CopyGateLabel label);

// The copy gate matched to an arbitrary purification basis: conjugate C0 by
// the basis-change unitary on both partitas; ancilla source is basis vector 0.
CopyGate copy_gate_for_basis(const MeasurementBasis& basis);

enum class ControlPolicy { First, Random };

struct PnpResult {
    bool aborted = false;              // empty pulse: nothing to purify
    std::optional<PureState> output_photon;  // the fresh partita-B photon toward the encoder
    std::optional<int> control_diagnostic;   // partita-A measurement outcome in the purification basis
    int removed_count = 0;             // photons discarded inside the station
};

/// Photon-number purification: copy one control photon onto a fresh ancilla in
/// the chosen basis, measure the control, and forward only the ancilla. All
/// other photons never leave the station. With probability (1 - gate_fidelity)
/// the gate output is replaced by a uniformly random qubit state.
PnpResult purify(const std::vector<PureState>& photons, const MeasurementBasis& pnp_basis, RandomStream& rng,
                 double gate_fidelity = 1.0, ControlPolicy policy = ControlPolicy::Random);

enum class PnpVerdict { Keep, DiscardPNP };

// Keep only rounds purified in the basis Alice actually used.
PnpVerdict pnp_sift(const MeasurementBasis& alice_basis, const MeasurementBasis& pnp_basis);

}  // namespace qkd
