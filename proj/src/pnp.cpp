#include "qkd/pnp.hpp"

#include <stdexcept>

namespace qkd {

std::vector<PureState> photon_states(const Pulse& pulse) {
    std::vector<PureState> states;
    states.reserve(pulse.photons.size());
    for (const Photon& p : pulse.photons) states.push_back(p.state);
    return states;
}

namespace {

Mat cnot_matrix() {
    return Mat::from_rows({{1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 0, 1}, {0, 0, 1, 0}});
}

}  // namespace

CopyGate copy_gate(CopyGateLabel label) {
    if (label == CopyGateLabel::C0) {
        return {label, Unitary(cnot_matrix()), PureState::ket("0")};
    }
    return copy_gate_for_basis(MeasurementBasis::x());
}

CopyGate copy_gate_for_basis(const MeasurementBasis& basis) {
    // W maps |0>,|1> to the basis vectors; conjugating the computational copy
    // gate by W x W makes it copy in that basis.
    Mat w(2, 2);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) w(i, j) = basis.vector(j).amp(i);
    const Mat ww = kron(w, w);
    const Mat m = ww * cnot_matrix() * ww.adjoint();
    const CopyGateLabel label = basis.label() == BasisLabel::X ? CopyGateLabel::CPlus : CopyGateLabel::C0;
    return {label, Unitary(m), basis.vector(0)};
}

PnpResult purify(const std::vector<PureState>& photons, const MeasurementBasis& pnp_basis, RandomStream& rng,
                 double gate_fidelity, ControlPolicy policy) {
    if (gate_fidelity <= 0.0 || gate_fidelity > 1.0) {
        throw std::invalid_argument("gate fidelity must lie in (0, 1]");
    }
    PnpResult result;
    if (photons.empty()) {
        result.aborted = true;
        return result;
    }
    for (const PureState& p : photons) {
        if (p.num_qubits() != 1) throw std::invalid_argument("purify expects single-qubit photons");
    }

    const size_t control_index =
        policy == ControlPolicy::First || photons.size() == 1
            ? 0
            : rng.uniform_int(static_cast<std::uint32_t>(photons.size()));
    const PureState& control = photons[control_index];

    const CopyGate gate = copy_gate_for_basis(pnp_basis);
    PureState joint = tensor(control, gate.ancilla_source);
    if (rng.bernoulli(gate_fidelity)) {
        joint = apply(gate.matrix, joint);
    } else {
        // Gate fault: the ancilla comes out scrambled, the control untouched.
        joint = tensor(control, rng.haar_qubit());
    }

    const MeasurementOutcome meas = measure_qubit(joint, 0, pnp_basis, rng);
    result.control_diagnostic = meas.outcome;
    const ProjectionResult proj = project_and_remove(meas.collapsed, 0, pnp_basis.vector(meas.outcome));
    if (!proj.remainder) throw std::logic_error("purify lost the ancilla partita");
    result.output_photon = *proj.remainder;
    result.removed_count = static_cast<int>(photons.size()) - 1;
    return result;
}

PnpVerdict pnp_sift(const MeasurementBasis& alice_basis, const MeasurementBasis& pnp_basis) {
    return alice_basis == pnp_basis ? PnpVerdict::Keep : PnpVerdict::DiscardPNP;
}

}  // namespace qkd
