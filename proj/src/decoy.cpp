#include "qkd/decoy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qkd {

namespace {

constexpr int kTruthCap = 8;  // photon numbers above this land in the last bucket

void tally_truth(std::vector<std::int64_t>& buckets, int n) {
    if (static_cast<int>(buckets.size()) < kTruthCap + 1) buckets.resize(kTruthCap + 1, 0);
    buckets[static_cast<size_t>(std::min(n, kTruthCap))] += 1;
}

}  // namespace

void ChannelModel::validate() const {
    if (!(transmittance > 0.0 && transmittance <= 1.0)) throw std::invalid_argument("transmittance must be in (0, 1]");
    if (dark_count < 0.0 || dark_count >= 1.0) throw std::invalid_argument("dark count probability out of range");
    if (depolarizing < 0.0 || depolarizing > 1.0) throw std::invalid_argument("depolarizing probability out of range");
}

void IntensitySchedule::validate() const {
    if (levels.empty()) throw std::invalid_argument("intensity schedule is empty");
    double total = 0.0;
    for (const IntensityLevel& l : levels) {
        if (l.mu < 0.0) throw std::invalid_argument("negative intensity");
        if (l.probability <= 0.0) throw std::invalid_argument("intensity probabilities must be positive");
        if (l.label == "vacuum" && l.mu != 0.0) throw std::invalid_argument("vacuum intensity must have mu = 0");
        total += l.probability;
    }
    if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("intensity probabilities must sum to 1");
    const int s = index_of("signal"), d = index_of("decoy");
    if (s >= 0 && d >= 0 && !(levels[static_cast<size_t>(s)].mu > levels[static_cast<size_t>(d)].mu)) {
        throw std::invalid_argument("signal intensity must exceed the decoy intensity");
    }
}

int IntensitySchedule::index_of(const std::string& label) const {
    for (size_t i = 0; i < levels.size(); ++i)
        if (levels[i].label == label) return static_cast<int>(i);
    return -1;
}

int IntensitySchedule::pick(RandomStream& rng) const {
    double u = rng.uniform();
    for (size_t i = 0; i < levels.size(); ++i) {
        u -= levels[i].probability;
        if (u < 0.0) return static_cast<int>(i);
    }
    return static_cast<int>(levels.size()) - 1;
}

int sample_photon_number(double mu, RandomStream& rng) { return rng.poisson(mu); }

void transmit(Pulse& pulse, const ChannelModel& channel, RandomStream& rng) {
    channel.validate();
    std::vector<Photon> survivors;
    survivors.reserve(pulse.photons.size());
    for (Photon& p : pulse.photons) {
        if (!rng.bernoulli(channel.transmittance)) continue;
        if (channel.depolarizing > 0.0 && rng.bernoulli(channel.depolarizing)) {
            // One uniformly chosen Pauli fault.
            const std::uint32_t which = rng.uniform_int(3);
            const Unitary fault = which == 0 ? gates::x() : which == 1 ? gates::y() : gates::z();
            p.state = apply(fault, p.state);
        }
        survivors.push_back(std::move(p));
    }
    pulse.photons = std::move(survivors);
}

const IntensityTally& GainYieldStats::level(const std::string& label) const {
    for (const IntensityTally& t : levels)
        if (t.label == label) return t;
    throw std::invalid_argument("no tally for intensity: " + label);
}

void GainYieldStats::merge(const GainYieldStats& other) {
    if (levels.empty()) {
        levels = other.levels;
        return;
    }
    if (levels.size() != other.levels.size()) throw std::invalid_argument("tally shape mismatch");
    for (size_t i = 0; i < levels.size(); ++i) {
        levels[i].sent += other.levels[i].sent;
        levels[i].detected += other.levels[i].detected;
        auto& a = levels[i].truth_sent_by_n;
        auto& b = levels[i].truth_detected_by_n;
        const auto& oa = other.levels[i].truth_sent_by_n;
        const auto& ob = other.levels[i].truth_detected_by_n;
        if (a.size() < oa.size()) a.resize(oa.size(), 0);
        if (b.size() < ob.size()) b.resize(ob.size(), 0);
        for (size_t k = 0; k < oa.size(); ++k) a[k] += oa[k];
        for (size_t k = 0; k < ob.size(); ++k) b[k] += ob[k];
    }
}

double estimate_y1_lower_bound(const GainYieldStats& stats) {
    const IntensityTally& sig = stats.level("signal");
    const IntensityTally& dec = stats.level("decoy");
    const IntensityTally& vac = stats.level("vacuum");
    const double mu = sig.mu, nu = dec.mu;
    if (!(mu > nu && nu > 0.0)) throw std::invalid_argument("decoy bound needs signal mu > decoy nu > 0");
    for (const IntensityTally* t : {&sig, &dec, &vac}) {
        if (t->sent < 10'000) throw std::invalid_argument("insufficient counts for intensity " + t->label);
    }

    const double q_mu = sig.gain();
    const double q_nu = dec.gain();
    const double y0 = vac.gain();

    const double bound = (mu / (mu * nu - nu * nu)) *
                         (q_nu * std::exp(nu) - q_mu * std::exp(mu) * (nu * nu) / (mu * mu) -
                          ((mu * mu - nu * nu) / (mu * mu)) * y0);
    return std::max(0.0, bound);
}

double ground_truth_y1(const GainYieldStats& stats) {
    std::int64_t sent = 0, detected = 0;
    for (const IntensityTally& t : stats.levels) {
        if (t.truth_sent_by_n.size() > 1) {
            sent += t.truth_sent_by_n[1];
            detected += t.truth_detected_by_n[1];
        }
    }
    return sent > 0 ? static_cast<double>(detected) / static_cast<double>(sent) : 0.0;
}

DecoyAnalysis analyze_decoy(const GainYieldStats& stats) {
    DecoyAnalysis out;
    const IntensityTally& sig = stats.level("signal");
    out.y0 = stats.level("vacuum").gain();
    out.y1_lower_bound = estimate_y1_lower_bound(stats);

    // What an honest lossy line consistent with the observed signal gain would
    // give for the single-photon yield: Q_mu = 1 - (1 - Y0) e^{-eta mu}.
    const double q_mu = sig.gain();
    const double survive = std::clamp((1.0 - q_mu) / std::max(1e-12, 1.0 - out.y0), 1e-12, 1.0);
    const double eta_implied = -std::log(survive) / sig.mu;
    out.y1_implied_honest = 1.0 - (1.0 - out.y0) * std::exp(-eta_implied);

    out.consistency_ratio =
        out.y1_implied_honest > 0.0 ? out.y1_lower_bound / out.y1_implied_honest : 1.0;
    out.inconsistency_flag = out.consistency_ratio < 0.5;
    return out;
}

GainYieldStats run_gain_session(const IntensitySchedule& schedule, const ChannelModel& channel,
                                const GainSessionOptions& options) {
    schedule.validate();
    channel.validate();

    GainYieldStats stats;
    for (const IntensityLevel& l : schedule.levels) {
        IntensityTally t;
        t.label = l.label;
        t.mu = l.mu;
        t.truth_sent_by_n.assign(kTruthCap + 1, 0);
        t.truth_detected_by_n.assign(kTruthCap + 1, 0);
        stats.levels.push_back(std::move(t));
    }

    for (std::int64_t i = 0; i < options.pulses; ++i) {
        RandomStream rng(options.seed, options.session, static_cast<std::uint64_t>(i));
        const int level = schedule.pick(rng);
        IntensityTally& tally = stats.levels[static_cast<size_t>(level)];
        const int n = sample_photon_number(schedule.levels[static_cast<size_t>(level)].mu, rng);
        tally.sent += 1;
        tally_truth(tally.truth_sent_by_n, n);

        int arriving = 0;
        if (options.pns_attack) {
            // Eve intercepts at the source and forwards over a lossless line.
            if (n >= 2) {
                arriving = n - 1;
            } else if (n == 1) {
                arriving = rng.bernoulli(options.pns_block_single) ? 0 : 1;
            }
        } else {
            for (int k = 0; k < n; ++k)
                if (rng.bernoulli(channel.transmittance)) ++arriving;
        }

        const bool detected = arriving > 0 || rng.bernoulli(channel.dark_count);
        if (detected) {
            tally.detected += 1;
            tally_truth(tally.truth_detected_by_n, n);
        }
    }
    return stats;
}

}  // namespace qkd
