#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>

#include "qkd/linalg.hpp"

namespace qkd {

// Algebraic identities (unitarity, normalization, orthogonality) are held to
// this tolerance; iteratively computed optima use kSolverTol instead.
inline constexpr double kAlgebraTol = 1e-12;
inline constexpr double kSolverTol = 1e-6;

/// Normalized pure state of 1..4 qubits. Qubit 0 is the leftmost tensor
/// factor (most significant bit of the amplitude index).
class PureState {
public:
    explicit PureState(CVec amplitudes);

    int num_qubits() const { return qubits_; }
    int dim() const { return static_cast<int>(amps_.size()); }
    const CVec& amplitudes() const { return amps_; }
    const cx& amp(int i) const { return amps_[static_cast<size_t>(i)]; }

    // Single-qubit kets by conventional name: "0" "1" "+" "-" "a" "b".
    static PureState ket(const std::string& name);
    static PureState basis_state(int num_qubits, int index);

private:
    CVec amps_;
    int qubits_;
};

cx inner_product(const PureState& a, const PureState& b);
bool approx_equal_up_to_phase(const PureState& a, const PureState& b, double tol = 1e-9);

/// Square matrix with U U^dagger = I within kAlgebraTol, checked at construction.
class Unitary {
public:
    explicit Unitary(Mat matrix);

    int dim() const { return m_.rows(); }
    const Mat& matrix() const { return m_; }

private:
    Mat m_;
};

namespace gates {
Unitary identity();
Unitary x();
Unitary y();
Unitary z();
Unitary h();
}  // namespace gates

enum class BasisLabel { Z, X, Y, General };

/// An orthonormal single-qubit measurement basis. General(theta) is
/// {cos(theta)|0> + sin(theta)|1>, sin(theta)|0> - cos(theta)|1>}.
class MeasurementBasis {
public:
    static MeasurementBasis z();
    static MeasurementBasis x();
    static MeasurementBasis y();
    static MeasurementBasis general(double theta);

    BasisLabel label() const { return label_; }
    double theta() const { return theta_; }
    const PureState& vector(int index) const;
    std::string name() const;

    friend bool operator==(const MeasurementBasis& a, const MeasurementBasis& b);

private:
    MeasurementBasis(BasisLabel label, double theta, PureState v0, PureState v1);

    BasisLabel label_;
    double theta_;
    PureState v0_;
    PureState v1_;
};

/// Deterministic random stream addressed by (seed, session, round). Identical
/// addresses replay identical draw sequences; distinct rounds are independent
/// substreams, so rounds can be evaluated in any order or in parallel.
class RandomStream {
public:
    RandomStream(std::uint64_t seed, std::uint64_t session, std::uint64_t round);

    std::uint64_t next_u64();
    double uniform();  // [0, 1)
    std::uint32_t uniform_int(std::uint32_t n);
    bool bernoulli(double p);
    int poisson(double mu);  // direct product method; fine for desk-scale mu
    double normal();
    PureState haar_qubit();

private:
    std::uint64_t state_;
};

// --- Operations -------------------------------------------------------------

PureState apply(const Unitary& u, const PureState& s);
PureState tensor(const PureState& a, const PureState& b);

// Probabilities of outcomes 0/1 when measuring one qubit in a basis.
std::pair<double, double> born_probabilities(const PureState& s, int which, const MeasurementBasis& basis);

struct MeasurementOutcome {
    int outcome;
    PureState collapsed;  // same qubit count, measured qubit collapsed onto the basis vector
};
MeasurementOutcome measure_qubit(const PureState& s, int which, const MeasurementBasis& basis, RandomStream& rng);

// Projects qubit `which` onto a single-qubit state and removes it, returning
// the renormalized remainder. Probability of the projection comes along so
// callers can sample branches themselves.
struct ProjectionResult {
    double probability;
    std::optional<PureState> remainder;  // nullopt when probability ~ 0 or no qubits remain
};
ProjectionResult project_and_remove(const PureState& s, int which, const PureState& onto);

}  // namespace qkd
