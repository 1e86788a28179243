#include "qkd/qmath.hpp"

#include <bit>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace qkd {

namespace {

constexpr double kInvSqrt2 = 0.7071067811865475244;

int qubit_count_for_dim(size_t dim) {
    if (dim < 2 || dim > 16 || !std::has_single_bit(dim)) {
        throw std::invalid_argument("state dimension must be a power of two in [2, 16]");
    }
    return std::countr_zero(dim);
}

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace

// --- PureState ---------------------------------------------------------------

PureState::PureState(CVec amplitudes) : amps_(std::move(amplitudes)) {
    qubits_ = qubit_count_for_dim(amps_.size());
    const double n = vec_norm(amps_);
    if (n < 1e-9) throw std::invalid_argument("state has (near) zero norm");
    if (std::abs(n - 1.0) > 1e-9) throw std::invalid_argument("state amplitudes are not normalized");
    // Tighten to kAlgebraTol regardless of the input's roundoff.
    for (cx& a : amps_) a /= n;
}

PureState PureState::ket(const std::string& name) {
    if (name == "0") return PureState({1.0, 0.0});
    if (name == "1") return PureState({0.0, 1.0});
    if (name == "+") return PureState({kInvSqrt2, kInvSqrt2});
    if (name == "-") return PureState({kInvSqrt2, -kInvSqrt2});
    if (name == "a") return PureState({kInvSqrt2, cx(0.0, kInvSqrt2)});
    if (name == "b") return PureState({kInvSqrt2, cx(0.0, -kInvSqrt2)});
    throw std::invalid_argument("unknown ket name: " + name);
}

PureState PureState::basis_state(int num_qubits, int index) {
    if (num_qubits < 1 || num_qubits > 4) throw std::invalid_argument("qubit count out of range");
    CVec v(static_cast<size_t>(1) << num_qubits);
    v.at(static_cast<size_t>(index)) = 1.0;
    return PureState(std::move(v));
}

cx inner_product(const PureState& a, const PureState& b) {
    return inner(a.amplitudes(), b.amplitudes());
}

bool approx_equal_up_to_phase(const PureState& a, const PureState& b, double tol) {
    if (a.dim() != b.dim()) return false;
    return 1.0 - std::norm(inner_product(a, b)) <= tol;
}

// --- Unitary ------------------------------------------------------------------

Unitary::Unitary(Mat matrix) : m_(std::move(matrix)) {
    if (m_.rows() != m_.cols()) throw std::invalid_argument("unitary must be square");
    Mat test = m_ * m_.adjoint();
    test -= Mat::identity(m_.rows());
    if (test.frobenius_norm() > m_.rows() * kAlgebraTol * 10) {
        throw std::invalid_argument("matrix is not unitary");
    }
}

namespace gates {

Unitary identity() { return Unitary(Mat::identity(2)); }
Unitary x() { return Unitary(Mat::from_rows({{0, 1}, {1, 0}})); }
Unitary y() { return Unitary(Mat::from_rows({{0, cx(0, -1)}, {cx(0, 1), 0}})); }
Unitary z() { return Unitary(Mat::from_rows({{1, 0}, {0, -1}})); }
Unitary h() { return Unitary(Mat::from_rows({{kInvSqrt2, kInvSqrt2}, {kInvSqrt2, -kInvSqrt2}})); }

}  // namespace gates

// --- MeasurementBasis ----------------------------------------------------------

MeasurementBasis::MeasurementBasis(BasisLabel label, double theta, PureState v0, PureState v1)
    : label_(label), theta_(theta), v0_(std::move(v0)), v1_(std::move(v1)) {
    if (std::abs(inner_product(v0_, v1_)) > kAlgebraTol) {
        throw std::invalid_argument("basis vectors are not orthogonal");
    }
}

MeasurementBasis MeasurementBasis::z() {
    return MeasurementBasis(BasisLabel::Z, 0.0, PureState::ket("0"), PureState::ket("1"));
}
MeasurementBasis MeasurementBasis::x() {
    return MeasurementBasis(BasisLabel::X, 0.0, PureState::ket("+"), PureState::ket("-"));
}
MeasurementBasis MeasurementBasis::y() {
    return MeasurementBasis(BasisLabel::Y, 0.0, PureState::ket("a"), PureState::ket("b"));
}
MeasurementBasis MeasurementBasis::general(double theta) {
    if (!(theta > 0.0 && theta < std::numbers::pi / 2)) {
        throw std::invalid_argument("general basis angle must lie in (0, pi/2)");
    }
    const double c = std::cos(theta), s = std::sin(theta);
    return MeasurementBasis(BasisLabel::General, theta, PureState({c, s}), PureState({s, -c}));
}

const PureState& MeasurementBasis::vector(int index) const {
    if (index == 0) return v0_;
    if (index == 1) return v1_;
    throw std::out_of_range("basis vector index");
}

std::string MeasurementBasis::name() const {
    switch (label_) {
        case BasisLabel::Z: return "Z";
        case BasisLabel::X: return "X";
        case BasisLabel::Y: return "Y";
        case BasisLabel::General: return "B1";
    }
    return "?";
}

bool operator==(const MeasurementBasis& a, const MeasurementBasis& b) {
    if (a.label_ != b.label_) return false;
    if (a.label_ == BasisLabel::General) return std::abs(a.theta_ - b.theta_) < 1e-12;
    return true;
}

// --- RandomStream ---------------------------------------------------------------

RandomStream::RandomStream(std::uint64_t seed, std::uint64_t session, std::uint64_t round) {
    // Chain the address components through the mixer so that nearby
    // (session, round) pairs land on unrelated streams.
    std::uint64_t s = seed;
    (void)splitmix64(s);
    s ^= 0x6a09e667f3bcc909ULL + session;
    (void)splitmix64(s);
    s ^= 0xbb67ae8584caa73bULL + round;
    (void)splitmix64(s);
    state_ = s;
}

std::uint64_t RandomStream::next_u64() { return splitmix64(state_); }

double RandomStream::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint32_t RandomStream::uniform_int(std::uint32_t n) {
    if (n == 0) throw std::invalid_argument("uniform_int needs n > 0");
    const std::uint64_t bound = ~std::uint64_t{0} - (~std::uint64_t{0} % n + 1) % n;
    for (;;) {
        const std::uint64_t r = next_u64();
        if (r <= bound) return static_cast<std::uint32_t>(r % n);
    }
}

bool RandomStream::bernoulli(double p) { return uniform() < p; }

int RandomStream::poisson(double mu) {
    if (mu < 0.0 || mu > 50.0) throw std::invalid_argument("poisson mean out of supported range [0, 50]");
    if (mu == 0.0) return 0;
    const double limit = std::exp(-mu);
    int n = -1;
    double prod = 1.0;
    do {
        prod *= uniform();
        ++n;
    } while (prod > limit);
    return n;
}

double RandomStream::normal() {
    const double u1 = 1.0 - uniform();  // avoid log(0)
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

PureState RandomStream::haar_qubit() {
    for (;;) {
        CVec v{cx(normal(), normal()), cx(normal(), normal())};
        const double n = vec_norm(v);
        if (n < 1e-6) continue;
        for (cx& a : v) a /= n;
        return PureState(std::move(v));
    }
}

// --- Operations -------------------------------------------------------------------

PureState apply(const Unitary& u, const PureState& s) {
    if (u.dim() != s.dim()) throw std::invalid_argument("operator/state dimension mismatch");
    return PureState(u.matrix() * s.amplitudes());
}

PureState tensor(const PureState& a, const PureState& b) {
    if (a.num_qubits() + b.num_qubits() > 4) throw std::invalid_argument("tensor product exceeds 4 qubits");
    CVec out(static_cast<size_t>(a.dim()) * b.dim());
    for (int i = 0; i < a.dim(); ++i)
        for (int j = 0; j < b.dim(); ++j) out[static_cast<size_t>(i) * b.dim() + j] = a.amp(i) * b.amp(j);
    return PureState(std::move(out));
}

namespace {

// Overlap of basis vector `v` with the (pair) amplitudes of qubit `which` at
// each joint index of the other qubits. inner[j] = <v|psi_pair_j>.
CVec qubit_overlaps(const PureState& s, int which, const PureState& v) {
    const int n = s.num_qubits();
    if (which < 0 || which >= n) throw std::out_of_range("qubit index out of range");
    const int shift = n - 1 - which;  // qubit 0 = most significant bit
    const size_t step = size_t{1} << shift;
    const size_t dim = static_cast<size_t>(s.dim());
    CVec overlaps(dim / 2);
    size_t out = 0;
    for (size_t base = 0; base < dim; base += 2 * step) {
        for (size_t off = 0; off < step; ++off) {
            const size_t i0 = base + off;
            overlaps[out++] = std::conj(v.amp(0)) * s.amp(static_cast<int>(i0)) +
                              std::conj(v.amp(1)) * s.amp(static_cast<int>(i0 + step));
        }
    }
    return overlaps;
}

}  // namespace

std::pair<double, double> born_probabilities(const PureState& s, int which, const MeasurementBasis& basis) {
    double p0 = 0.0, p1 = 0.0;
    for (const cx& a : qubit_overlaps(s, which, basis.vector(0))) p0 += std::norm(a);
    for (const cx& a : qubit_overlaps(s, which, basis.vector(1))) p1 += std::norm(a);
    return {p0, p1};
}

MeasurementOutcome measure_qubit(const PureState& s, int which, const MeasurementBasis& basis, RandomStream& rng) {
    const auto [p0, p1] = born_probabilities(s, which, basis);
    const int outcome = rng.uniform() * (p0 + p1) < p0 ? 0 : 1;
    const PureState& v = basis.vector(outcome);

    // Collapse: project the measured qubit onto |v>, renormalize.
    const int n = s.num_qubits();
    const int shift = n - 1 - which;
    const size_t step = size_t{1} << shift;
    const size_t dim = static_cast<size_t>(s.dim());
    CVec amps(dim);
    for (size_t base = 0; base < dim; base += 2 * step) {
        for (size_t off = 0; off < step; ++off) {
            const size_t i0 = base + off;
            const cx ip = std::conj(v.amp(0)) * s.amp(static_cast<int>(i0)) +
                          std::conj(v.amp(1)) * s.amp(static_cast<int>(i0 + step));
            amps[i0] = v.amp(0) * ip;
            amps[i0 + step] = v.amp(1) * ip;
        }
    }
    const double norm = vec_norm(amps);
    for (cx& a : amps) a /= norm;
    return {outcome, PureState(std::move(amps))};
}

ProjectionResult project_and_remove(const PureState& s, int which, const PureState& onto) {
    if (onto.num_qubits() != 1) throw std::invalid_argument("projection target must be a single qubit state");
    CVec overlaps = qubit_overlaps(s, which, onto);
    double p = 0.0;
    for (const cx& a : overlaps) p += std::norm(a);
    if (s.num_qubits() == 1) return {p, std::nullopt};
    if (p < 1e-12) return {p, std::nullopt};
    const double norm = std::sqrt(p);
    for (cx& a : overlaps) a /= norm;
    return {p, PureState(std::move(overlaps))};
}

}  // namespace qkd
