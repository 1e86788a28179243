#include "qkd/discrimination.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qkd {

namespace {

constexpr double kRankTol = 1e-9;

std::vector<Mat> weighted_projectors(const DiscriminationProblem& p) {
    std::vector<Mat> r;
    r.reserve(p.states.size());
    for (size_t i = 0; i < p.states.size(); ++i) {
        Mat m = outer(p.states[i], p.states[i]);
        m *= p.priors[i];
        r.push_back(std::move(m));
    }
    return r;
}

double povm_success(const std::vector<Mat>& weighted, const Povm& povm) {
    double s = 0.0;
    for (size_t i = 0; i < weighted.size(); ++i) s += (weighted[i] * povm.elements[i]).trace().real();
    return s;
}

// Lagrangian residual: most negative eigenvalue of (Gamma - R_i) over i.
double optimality_residual(const std::vector<Mat>& weighted, const Povm& povm) {
    const int d = weighted.front().rows();
    Mat gamma(d, d);
    for (size_t i = 0; i < weighted.size(); ++i) gamma += weighted[i] * povm.elements[i];
    // Hermitize; Gamma is Hermitian at the optimum.
    Mat herm(d, d);
    const Mat adj = gamma.adjoint();
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) herm(i, j) = 0.5 * (gamma(i, j) + adj(i, j));
    double asym = (gamma - adj).frobenius_norm();
    double worst = 0.0;
    for (const Mat& r : weighted) {
        worst = std::max(worst, -min_eigenvalue(herm - r));
    }
    return std::max(worst, asym);
}

// One fixed-point update: Pi_i <- S^-1/2 R_i Pi_i R_i S^-1/2 with
// S = sum R_i Pi_i R_i, completed on the kernel of S.
void fixed_point_step(const std::vector<Mat>& weighted, Povm& povm, size_t top_prior_index) {
    const int d = weighted.front().rows();
    Mat s(d, d);
    std::vector<Mat> pieces(weighted.size());
    for (size_t i = 0; i < weighted.size(); ++i) {
        pieces[i] = weighted[i] * povm.elements[i] * weighted[i];
        s += pieces[i];
    }
    const Mat t = psd_power(s, -0.5);
    Mat total(d, d);
    for (size_t i = 0; i < weighted.size(); ++i) {
        povm.elements[i] = t * pieces[i] * t;
        total += povm.elements[i];
    }
    // Complete the identity on the kernel of S; states have no support there,
    // so the assignment does not change the success value.
    Mat leftover = Mat::identity(d) - total;
    if (leftover.frobenius_norm() > 1e-14) povm.elements[top_prior_index] += leftover;
}

Povm square_root_measurement(const std::vector<Mat>& weighted, size_t top_prior_index) {
    const int d = weighted.front().rows();
    Mat sum(d, d);
    for (const Mat& r : weighted) sum += r;
    const Mat t = psd_power(sum, -0.5);
    Povm povm;
    povm.elements.reserve(weighted.size());
    Mat total(d, d);
    for (const Mat& r : weighted) {
        povm.elements.push_back(t * r * t);
        total += povm.elements.back();
    }
    Mat leftover = Mat::identity(d) - total;
    if (leftover.frobenius_norm() > 1e-14) povm.elements[top_prior_index] += leftover;
    return povm;
}

// For two states the optimal measurement is projective on the eigenbasis of
// R_1 - R_2; used as an extra starting point so the fixed point lands there.
std::optional<Povm> eigenbasis_start(const std::vector<Mat>& weighted) {
    if (weighted.size() != 2) return std::nullopt;
    const Mat diff = weighted[0] - weighted[1];
    const HermitianEig eig = hermitian_eig(diff);
    const int d = diff.rows();
    Povm povm;
    povm.elements = {Mat(d, d), Mat(d, d)};
    for (int k = 0; k < d; ++k) {
        CVec v(static_cast<size_t>(d));
        for (int i = 0; i < d; ++i) v[static_cast<size_t>(i)] = eig.vectors(i, k);
        povm.elements[eig.values[static_cast<size_t>(k)] > 0 ? 0 : 1] += outer(v, v);
    }
    return povm;
}

}  // namespace

void DiscriminationProblem::validate() const {
    if (states.empty()) throw std::invalid_argument("discrimination problem needs at least one state");
    if (states.size() != priors.size()) throw std::invalid_argument("states/priors size mismatch");
    const size_t d = states.front().size();
    if (d < 1 || d > 16) throw std::invalid_argument("dimension out of range [1, 16]");
    double total = 0.0;
    for (size_t i = 0; i < states.size(); ++i) {
        if (states[i].size() != d) throw std::invalid_argument("states have mixed dimensions");
        if (std::abs(vec_norm(states[i]) - 1.0) > 1e-9) throw std::invalid_argument("state not normalized");
        if (priors[i] < 0.0) throw std::invalid_argument("negative prior");
        total += priors[i];
    }
    if (std::abs(total - 1.0) > kAlgebraTol * states.size() * 10) {
        throw std::invalid_argument("priors must sum to 1");
    }
}

DiscriminationProblem uniform_problem(std::vector<CVec> states) {
    DiscriminationProblem p;
    p.priors.assign(states.size(), 1.0 / static_cast<double>(states.size()));
    p.states = std::move(states);
    return p;
}

bool Povm::valid(double tol) const {
    if (elements.empty()) return false;
    const int d = elements.front().rows();
    Mat total(d, d);
    for (const Mat& e : elements) {
        if (e.rows() != d || e.cols() != d) return false;
        if (!e.is_hermitian(tol)) return false;
        if (min_eigenvalue(e) < -tol) return false;
        total += e;
    }
    total -= Mat::identity(d);
    return total.frobenius_norm() <= tol * d;
}

std::vector<double> Povm::outcome_probabilities(const CVec& state) const {
    std::vector<double> p;
    p.reserve(elements.size());
    for (const Mat& e : elements) {
        const CVec ev = e * state;
        p.push_back(std::max(0.0, inner(state, ev).real()));
    }
    return p;
}

int Povm::sample(const CVec& state, RandomStream& rng) const {
    const std::vector<double> p = outcome_probabilities(state);
    double total = 0.0;
    for (double v : p) total += v;
    double u = rng.uniform() * total;
    for (size_t i = 0; i < p.size(); ++i) {
        u -= p[i];
        if (u < 0.0) return static_cast<int>(i);
    }
    return static_cast<int>(p.size()) - 1;
}

MinErrorResult min_error(const DiscriminationProblem& problem, const MinErrorOptions& options) {
    problem.validate();
    const std::vector<Mat> weighted = weighted_projectors(problem);
    const size_t top = static_cast<size_t>(
        std::max_element(problem.priors.begin(), problem.priors.end()) - problem.priors.begin());

    std::vector<Povm> starts;
    starts.push_back(square_root_measurement(weighted, top));
    if (auto eb = eigenbasis_start(weighted)) starts.push_back(std::move(*eb));

    MinErrorResult best;
    for (const Povm& start : starts) {
        Povm povm = start;
        double value = povm_success(weighted, povm);
        int it = 0;
        for (; it < options.max_iterations; ++it) {
            fixed_point_step(weighted, povm, top);
            const double next = povm_success(weighted, povm);
            const bool settled = std::abs(next - value) < options.value_tol;
            value = next;
            if (settled) break;
        }
        MinErrorResult r;
        r.success = value;
        r.povm = std::move(povm);
        r.iterations = it;
        r.residual = optimality_residual(weighted, r.povm);
        r.certified = r.residual <= options.residual_tol;
        // Success from a valid POVM is always achievable, so higher wins.
        if (r.success > best.success) best = std::move(r);
    }
    return best;
}

double helstrom_success(const CVec& a, const CVec& b, double prior_a, double prior_b) {
    const double overlap = std::norm(inner(a, b));
    return 0.5 * (1.0 + std::sqrt(std::max(0.0, 1.0 - 4.0 * prior_a * prior_b * overlap)));
}

void ProbeSpec::validate() const {
    if (ancilla_dim != 1 && ancilla_dim != 2) throw std::invalid_argument("ancilla dimension must be 1 or 2");
    if (static_cast<int>(state.size()) != 2 * ancilla_dim) throw std::invalid_argument("probe dimension mismatch");
    if (std::abs(vec_norm(state) - 1.0) > 1e-9) throw std::invalid_argument("probe not normalized");
}

std::vector<CVec> operator_outputs(const std::vector<Mat>& operators, const ProbeSpec& probe) {
    probe.validate();
    std::vector<CVec> out;
    out.reserve(operators.size());
    const Mat eye = Mat::identity(probe.ancilla_dim);
    for (const Mat& t : operators) out.push_back(kron(eye, t) * probe.state);
    return out;
}

namespace {

struct ProbeObjective {
    const std::vector<Mat>& operators;
    const std::vector<double>& priors;
    int ancilla_dim;

    double operator()(const std::vector<double>& x) const {
        CVec v(x.size() / 2);
        for (size_t k = 0; k < v.size(); ++k) v[k] = cx(x[2 * k], x[2 * k + 1]);
        const double n = vec_norm(v);
        if (n < 1e-8) return 0.0;
        for (cx& a : v) a /= n;
        ProbeSpec probe{ancilla_dim, std::move(v)};
        DiscriminationProblem p;
        p.states = operator_outputs(operators, probe);
        p.priors = priors;
        MinErrorOptions opt;
        opt.max_iterations = 2000;
        return min_error(p, opt).success;
    }
};

// Plain Nelder-Mead maximization (minimizes -f).
std::pair<std::vector<double>, double> nelder_mead(const ProbeObjective& f, const std::vector<double>& x0, double step,
                                                   double tol, int max_iter) {
    const size_t n = x0.size();
    std::vector<std::vector<double>> simplex(n + 1, x0);
    std::vector<double> value(n + 1);
    for (size_t i = 0; i < n; ++i) simplex[i + 1][i] += step;
    for (size_t i = 0; i <= n; ++i) value[i] = -f(simplex[i]);

    const auto order = [&] {
        for (size_t i = 0; i <= n; ++i)
            for (size_t j = i + 1; j <= n; ++j)
                if (value[j] < value[i]) {
                    std::swap(value[i], value[j]);
                    std::swap(simplex[i], simplex[j]);
                }
    };

    for (int it = 0; it < max_iter; ++it) {
        order();
        if (std::abs(value[n] - value[0]) < tol * 1e-3) break;

        std::vector<double> centroid(n, 0.0);
        for (size_t i = 0; i < n; ++i)
            for (size_t k = 0; k < n; ++k) centroid[k] += simplex[i][k] / static_cast<double>(n);

        const auto blend = [&](double alpha) {
            std::vector<double> p(n);
            for (size_t k = 0; k < n; ++k) p[k] = centroid[k] + alpha * (simplex[n][k] - centroid[k]);
            return p;
        };

        const std::vector<double> reflect = blend(-1.0);
        const double fr = -f(reflect);
        if (fr < value[0]) {
            const std::vector<double> expand = blend(-2.0);
            const double fe = -f(expand);
            if (fe < fr) {
                simplex[n] = expand;
                value[n] = fe;
            } else {
                simplex[n] = reflect;
                value[n] = fr;
            }
        } else if (fr < value[n - 1]) {
            simplex[n] = reflect;
            value[n] = fr;
        } else {
            const std::vector<double> contract = blend(fr < value[n] ? -0.5 : 0.5);
            const double fc = -f(contract);
            if (fc < std::min(fr, value[n])) {
                simplex[n] = contract;
                value[n] = fc;
            } else {
                for (size_t i = 1; i <= n; ++i) {
                    for (size_t k = 0; k < n; ++k) simplex[i][k] = 0.5 * (simplex[i][k] + simplex[0][k]);
                    value[i] = -f(simplex[i]);
                }
            }
        }
    }
    order();
    return {simplex[0], -value[0]};
}

}  // namespace

ProbeOptResult optimize_probe(const std::vector<Mat>& operators, const std::vector<double>& priors, int ancilla_dim,
                              const ProbeOptOptions& options) {
    if (ancilla_dim != 1 && ancilla_dim != 2) throw std::invalid_argument("ancilla dimension must be 1 or 2");
    const size_t params = 4 * static_cast<size_t>(ancilla_dim);
    const ProbeObjective objective{operators, priors, ancilla_dim};

    ProbeOptResult best;
    for (int start = 0; start < options.starts; ++start) {
        RandomStream rng(options.seed, 0xd15c, static_cast<std::uint64_t>(start));
        std::vector<double> x(params);
        for (double& v : x) v = rng.normal();
        const auto [xo, value] = nelder_mead(objective, x, 0.25, options.tol, options.max_nm_iterations);
        if (value > best.success) {  // ties resolved toward lowest start index
            best.success = value;
            CVec v(params / 2);
            for (size_t k = 0; k < v.size(); ++k) v[k] = cx(xo[2 * k], xo[2 * k + 1]);
            const double n = vec_norm(v);
            for (cx& a : v) a /= n;
            best.probe = ProbeSpec{ancilla_dim, std::move(v)};
        }
    }
    return best;
}

Mat isometry_extend(const CVec& s_z, const CVec& s_x) {
    if (s_z.size() != s_x.size()) throw std::invalid_argument("isometry columns must share a dimension");
    if (std::abs(vec_norm(s_z) - 1.0) > 1e-9 || std::abs(vec_norm(s_x) - 1.0) > 1e-9) {
        throw std::invalid_argument("isometry columns must be normalized");
    }
    if (std::abs(inner(s_z, s_x)) > 1e-9) {
        throw std::invalid_argument("isometry requires orthogonal input states");
    }
    Mat v(static_cast<int>(s_z.size()), 2);
    for (size_t i = 0; i < s_z.size(); ++i) {
        v(static_cast<int>(i), 0) = s_z[i];
        v(static_cast<int>(i), 1) = s_x[i];
    }
    return v;
}

UsdResult unambiguous_discrimination(const DiscriminationProblem& problem) {
    problem.validate();
    const int n = static_cast<int>(problem.states.size());
    const int d = problem.dim();

    UsdResult result;
    if (span_rank(problem.states, kRankTol) < n) {
        result.feasible = false;  // UsdInfeasible
        return result;
    }

    // Dual (reciprocal) states: columns of M (M^dagger M)^-1 satisfy
    // <dual_i | psi_j> = delta_ij.
    Mat m(d, n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < d; ++i) m(i, j) = problem.states[static_cast<size_t>(j)][static_cast<size_t>(i)];
    Mat gram = m.adjoint() * m;
    Mat duals = m * psd_power(gram, -1.0);

    std::vector<CVec> reciprocal(static_cast<size_t>(n));
    std::vector<double> dual_norm(static_cast<size_t>(n));
    for (int j = 0; j < n; ++j) {
        CVec v(static_cast<size_t>(d));
        for (int i = 0; i < d; ++i) v[static_cast<size_t>(i)] = duals(i, j);
        dual_norm[static_cast<size_t>(j)] = vec_norm(v);
        for (cx& a : v) a /= dual_norm[static_cast<size_t>(j)];
        reciprocal[static_cast<size_t>(j)] = std::move(v);
    }

    Mat sum(d, d);
    for (const CVec& r : reciprocal) sum += outer(r, r);
    const double scale = 1.0 / hermitian_eig(sum).values.back();

    result.feasible = true;
    result.conclusive_probability.resize(static_cast<size_t>(n));
    result.povm.elements.reserve(static_cast<size_t>(n) + 1);
    Mat total(d, d);
    for (int j = 0; j < n; ++j) {
        Mat e = outer(reciprocal[static_cast<size_t>(j)], reciprocal[static_cast<size_t>(j)]);
        e *= scale;
        total += e;
        result.povm.elements.push_back(std::move(e));
        // |<recip_j|psi_j>|^2 = 1 / ||dual_j||^2
        const double pc = scale / (dual_norm[static_cast<size_t>(j)] * dual_norm[static_cast<size_t>(j)]);
        result.conclusive_probability[static_cast<size_t>(j)] = pc;
        result.overall_conclusive_rate += problem.priors[static_cast<size_t>(j)] * pc;
    }
    result.povm.elements.push_back(Mat::identity(d) - total);
    return result;
}

}  // namespace qkd
