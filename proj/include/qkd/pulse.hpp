#pragma once

#include <vector>

#include "qkd/qmath.hpp"

namespace qkd {

// Simulation bookkeeping only. Honest parties operate on state views that do
// not carry these tags; the adversary re-identifies her own photons by them
// (standing in for timing/wavelength degrees of freedom).
enum class Provenance { FromAlice, EveProbe, BobAncilla };

struct Photon {
    PureState state;
    Provenance origin = Provenance::FromAlice;
};

/// A multi-photon signal in transit. Exact mode keeps at most 4 photons;
/// practical mode adds intensity metadata for decoy accounting.
struct Pulse {
    std::vector<Photon> photons;
    double intensity = 0.0;    // mean photon number of the source setting
    int intensity_label = -1;  // index into the active intensity schedule

    bool empty() const { return photons.empty(); }
    int size() const { return static_cast<int>(photons.size()); }
};

// The tag-free view honest operations receive.
std::vector<PureState> photon_states(const Pulse& pulse);

}  // namespace qkd
