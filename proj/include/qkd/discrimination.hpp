#pragma once

#include <optional>
#include <vector>

#include "qkd/qmath.hpp"

namespace qkd {

/// An ensemble of known pure states with prior probabilities, to be identified
/// by a single measurement. Dimension up to 16.
struct DiscriminationProblem {
    std::vector<CVec> states;
    std::vector<double> priors;

    void validate() const;  // throws on malformed input
    int dim() const { return states.empty() ? 0 : static_cast<int>(states.front().size()); }
};

DiscriminationProblem uniform_problem(std::vector<CVec> states);

/// Positive operator-valued measure: PSD elements summing to identity.
struct Povm {
    std::vector<Mat> elements;

    bool valid(double tol = 1e-9) const;
    // Outcome distribution for a given state.
    std::vector<double> outcome_probabilities(const CVec& state) const;
    int sample(const CVec& state, RandomStream& rng) const;
};

struct MinErrorResult {
    double success = 0.0;
    Povm povm;
    double residual = 0.0;  // optimality-condition violation; certified when <= tolerance
    int iterations = 0;
    bool certified = false;
};

struct MinErrorOptions {
    int max_iterations = 20000;
    double value_tol = 1e-12;
    double residual_tol = 1e-6;
};

// Minimum-error discrimination optimum via fixed-point iteration on the
// measurement operators, certified by the standard optimality condition
// (Gamma - p_i rho_i PSD for Gamma = sum_i p_i rho_i Pi_i).
MinErrorResult min_error(const DiscriminationProblem& problem, const MinErrorOptions& options = {});

// Closed-form two-state optimum (pure states).
double helstrom_success(const CVec& a, const CVec& b, double prior_a, double prior_b);

/// A probe state Eve feeds through Bob's encoder: an ancilla of dimension d
/// (1 or 2) joint with the single signal qubit that Bob operates on.
struct ProbeSpec {
    int ancilla_dim = 1;
    CVec state;  // dimension 2 * ancilla_dim

    void validate() const;
};

// The states (I_d x T) |probe> for each operator T.
std::vector<CVec> operator_outputs(const std::vector<Mat>& operators, const ProbeSpec& probe);

struct ProbeOptResult {
    ProbeSpec probe;
    double success = 0.0;
};

struct ProbeOptOptions {
    int starts = 32;
    double tol = 1e-6;
    std::uint64_t seed = 7;
    int max_nm_iterations = 400;
};

// Maximizes min_error success of the operator outputs over probe states by
// multi-start Nelder-Mead on the (real) amplitude chart.
ProbeOptResult optimize_probe(const std::vector<Mat>& operators, const std::vector<double>& priors, int ancilla_dim,
                              const ProbeOptOptions& options = {});

// Isometry with columns (s_Z, s_X); requires the two states orthonormal.
Mat isometry_extend(const CVec& s_z, const CVec& s_x);

struct UsdResult {
    bool feasible = false;  // false = states linearly dependent (UsdInfeasible)
    std::vector<double> conclusive_probability;  // per state, given that state
    double overall_conclusive_rate = 0.0;        // prior-weighted
    Povm povm;                                   // N conclusive elements then the inconclusive one
};

// Unambiguous discrimination by reciprocal (dual-basis) states with a uniform
// scale chosen to keep the inconclusive element PSD. Conclusive outcomes never
// misidentify; linearly dependent inputs are infeasible.
UsdResult unambiguous_discrimination(const DiscriminationProblem& problem);

}  // namespace qkd
