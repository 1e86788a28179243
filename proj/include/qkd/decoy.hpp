#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qkd/pulse.hpp"
#include "qkd/qmath.hpp"

namespace qkd {

/// Lossy / noisy line between stations: per-photon survival, a Pauli
/// depolarizing fault per surviving photon, and dark counts at detection.
struct ChannelModel {
    double transmittance = 1.0;
    double dark_count = 0.0;
    double depolarizing = 0.0;

    void validate() const;
    bool is_identity() const { return transmittance == 1.0 && dark_count == 0.0 && depolarizing == 0.0; }
};

struct IntensityLevel {
    std::string label;  // "signal", "decoy" or "vacuum"
    double mu = 0.0;
    double probability = 0.0;
};

/// Alice's decoy-state schedule: randomized source intensities whose observed
/// gains must stay mutually consistent under any photon-number-selective attack.
struct IntensitySchedule {
    std::vector<IntensityLevel> levels;

    void validate() const;
    int index_of(const std::string& label) const;  // -1 when absent
    int pick(RandomStream& rng) const;
};

// Photon number of one weak-coherent pulse.
int sample_photon_number(double mu, RandomStream& rng);

// Applies loss and depolarizing faults photon by photon. Dark counts are a
// detection-side effect and are handled where detection happens.
void transmit(Pulse& pulse, const ChannelModel& channel, RandomStream& rng);

struct IntensityTally {
    std::string label;
    double mu = 0.0;
    std::int64_t sent = 0;
    std::int64_t detected = 0;
    // Ground truth by photon number (index n, capped). Estimators must never
    // read these; they exist so tests can compare bounds against reality.
    std::vector<std::int64_t> truth_sent_by_n;
    std::vector<std::int64_t> truth_detected_by_n;

    double gain() const { return sent > 0 ? static_cast<double>(detected) / static_cast<double>(sent) : 0.0; }
};

struct GainYieldStats {
    std::vector<IntensityTally> levels;

    const IntensityTally& level(const std::string& label) const;
    void merge(const GainYieldStats& other);
};

// Vacuum + weak-decoy lower bound on the single-photon yield, computed from
// observed gains only. This is the standard decoy-state inequality from the
// literature, not something this project derives.
double estimate_y1_lower_bound(const GainYieldStats& stats);

// True single-photon yield from the hidden per-photon-number tallies
// (test/inspection use only).
double ground_truth_y1(const GainYieldStats& stats);

struct DecoyAnalysis {
    double y0 = 0.0;
    double y1_lower_bound = 0.0;
    double y1_implied_honest = 0.0;  // what the signal gain alone suggests for an honest line
    double consistency_ratio = 0.0;  // bound / implied
    bool inconsistency_flag = false; // photon-number-selective attack suspected
};

DecoyAnalysis analyze_decoy(const GainYieldStats& stats);

struct GainSessionOptions {
    std::int64_t pulses = 1'000'000;
    std::uint64_t seed = 1;
    std::uint64_t session = 0;
    // Photon-number-splitting knobs; enabled => Eve supplies a lossless line,
    // steals one photon from multi-photon pulses and blocks single-photon
    // pulses with the given probability.
    bool pns_attack = false;
    double pns_block_single = 1.0;
};

// Counts-level decoy session: samples photon numbers and detections without
// tracking qubit states (gains do not depend on them). Fast enough for many
// million-pulse sessions.
GainYieldStats run_gain_session(const IntensitySchedule& schedule, const ChannelModel& channel,
                                const GainSessionOptions& options);

}  // namespace qkd
