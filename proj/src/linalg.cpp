#include "qkd/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace qkd {

Mat Mat::identity(int n) {
    Mat m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Mat Mat::from_rows(std::initializer_list<std::initializer_list<cx>> rows) {
    const int r = static_cast<int>(rows.size());
    const int c = r > 0 ? static_cast<int>(rows.begin()->size()) : 0;
    Mat m(r, c);
    int i = 0;
    for (const auto& row : rows) {
        if (static_cast<int>(row.size()) != c) throw std::invalid_argument("ragged matrix rows");
        int j = 0;
        for (const cx& v : row) m(i, j++) = v;
        ++i;
    }
    return m;
}

Mat Mat::adjoint() const {
    Mat m(cols_, rows_);
    for (int i = 0; i < rows_; ++i)
        for (int j = 0; j < cols_; ++j) m(j, i) = std::conj((*this)(i, j));
    return m;
}

cx Mat::trace() const {
    cx t = 0.0;
    for (int i = 0; i < std::min(rows_, cols_); ++i) t += (*this)(i, i);
    return t;
}

double Mat::frobenius_norm() const {
    double s = 0.0;
    for (const cx& v : a_) s += std::norm(v);
    return std::sqrt(s);
}

bool Mat::is_hermitian(double tol) const {
    if (rows_ != cols_) return false;
    for (int i = 0; i < rows_; ++i)
        for (int j = i; j < cols_; ++j)
            if (std::abs((*this)(i, j) - std::conj((*this)(j, i))) > tol) return false;
    return true;
}

Mat& Mat::operator+=(const Mat& other) {
    if (rows_ != other.rows_ || cols_ != other.cols_) throw std::invalid_argument("matrix size mismatch");
    for (size_t k = 0; k < a_.size(); ++k) a_[k] += other.a_[k];
    return *this;
}

Mat& Mat::operator-=(const Mat& other) {
    if (rows_ != other.rows_ || cols_ != other.cols_) throw std::invalid_argument("matrix size mismatch");
    for (size_t k = 0; k < a_.size(); ++k) a_[k] -= other.a_[k];
    return *this;
}

Mat& Mat::operator*=(cx scale) {
    for (cx& v : a_) v *= scale;
    return *this;
}

Mat operator+(Mat lhs, const Mat& rhs) { lhs += rhs; return lhs; }
Mat operator-(Mat lhs, const Mat& rhs) { lhs -= rhs; return lhs; }
Mat operator*(cx scale, Mat m) { m *= scale; return m; }

Mat operator*(const Mat& lhs, const Mat& rhs) {
    if (lhs.cols() != rhs.rows()) throw std::invalid_argument("matrix product size mismatch");
    Mat out(lhs.rows(), rhs.cols());
    for (int i = 0; i < lhs.rows(); ++i)
        for (int k = 0; k < lhs.cols(); ++k) {
            const cx l = lhs(i, k);
            if (l == cx{}) continue;
            for (int j = 0; j < rhs.cols(); ++j) out(i, j) += l * rhs(k, j);
        }
    return out;
}

CVec operator*(const Mat& m, const CVec& v) {
    if (m.cols() != static_cast<int>(v.size())) throw std::invalid_argument("matvec size mismatch");
    CVec out(m.rows());
    for (int i = 0; i < m.rows(); ++i) {
        cx s = 0.0;
        for (int j = 0; j < m.cols(); ++j) s += m(i, j) * v[j];
        out[i] = s;
    }
    return out;
}

Mat kron(const Mat& a, const Mat& b) {
    Mat out(a.rows() * b.rows(), a.cols() * b.cols());
    for (int ia = 0; ia < a.rows(); ++ia)
        for (int ja = 0; ja < a.cols(); ++ja) {
            const cx f = a(ia, ja);
            if (f == cx{}) continue;
            for (int ib = 0; ib < b.rows(); ++ib)
                for (int jb = 0; jb < b.cols(); ++jb)
                    out(ia * b.rows() + ib, ja * b.cols() + jb) = f * b(ib, jb);
        }
    return out;
}

Mat outer(const CVec& u, const CVec& v) {
    Mat m(static_cast<int>(u.size()), static_cast<int>(v.size()));
    for (size_t i = 0; i < u.size(); ++i)
        for (size_t j = 0; j < v.size(); ++j) m(static_cast<int>(i), static_cast<int>(j)) = u[i] * std::conj(v[j]);
    return m;
}

cx inner(const CVec& u, const CVec& v) {
    if (u.size() != v.size()) throw std::invalid_argument("inner product size mismatch");
    cx s = 0.0;
    for (size_t i = 0; i < u.size(); ++i) s += std::conj(u[i]) * v[i];
    return s;
}

double vec_norm(const CVec& v) {
    double s = 0.0;
    for (const cx& a : v) s += std::norm(a);
    return std::sqrt(s);
}

HermitianEig hermitian_eig(const Mat& input) {
    if (input.rows() != input.cols()) throw std::invalid_argument("eigendecomposition needs a square matrix");
    const int n = input.rows();

    // Symmetrize to wash out caller roundoff.
    Mat a(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a(i, j) = 0.5 * (input(i, j) + std::conj(input(j, i)));

    Mat v = Mat::identity(n);
    const double scale = std::max(1.0, a.frobenius_norm());

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) off += std::norm(a(p, q));
        if (std::sqrt(off) < 1e-14 * scale) break;

        for (int p = 0; p < n; ++p) {
            for (int q = p + 1; q < n; ++q) {
                const cx apq = a(p, q);
                const double r = std::abs(apq);
                if (r < 1e-300) continue;
                // Stable Jacobi rotation: strip the phase of a(p,q), then use
                // the small-root tangent so tiny pivots give tiny angles.
                const double theta = (a(q, q).real() - a(p, p).real()) / (2.0 * r);
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(1.0 + theta * theta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                const cx phase = std::conj(apq) / r;  // e^{-i arg(apq)}
                // Rotation columns (c, -s*phase) and (s, c*phase).
                const cx g0 = c, g1 = -s * phase;
                const cx h0 = s, h1 = c * phase;
                // a <- J^dagger a
                for (int k = 0; k < n; ++k) {
                    const cx ap = a(p, k), aq = a(q, k);
                    a(p, k) = std::conj(g0) * ap + std::conj(g1) * aq;
                    a(q, k) = std::conj(h0) * ap + std::conj(h1) * aq;
                }
                // a <- a J ; v <- v J
                for (int k = 0; k < n; ++k) {
                    const cx ap = a(k, p), aq = a(k, q);
                    a(k, p) = ap * g0 + aq * g1;
                    a(k, q) = ap * h0 + aq * h1;
                    const cx vp = v(k, p), vq = v(k, q);
                    v(k, p) = vp * g0 + vq * g1;
                    v(k, q) = vp * h0 + vq * h1;
                }
            }
        }
    }

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int i, int j) { return a(i, i).real() < a(j, j).real(); });

    HermitianEig out;
    out.values.resize(n);
    out.vectors = Mat(n, n);
    for (int j = 0; j < n; ++j) {
        out.values[j] = a(order[j], order[j]).real();
        for (int i = 0; i < n; ++i) out.vectors(i, j) = v(i, order[j]);
    }
    return out;
}

double min_eigenvalue(const Mat& hermitian) {
    return hermitian_eig(hermitian).values.front();
}

Mat psd_power(const Mat& a, double power, double relative_cutoff) {
    const HermitianEig eig = hermitian_eig(a);
    const int n = a.rows();
    const double lmax = eig.values.empty() ? 0.0 : eig.values.back();
    const double cutoff = std::max(lmax, 0.0) * relative_cutoff;
    Mat out(n, n);
    for (int k = 0; k < n; ++k) {
        const double lam = eig.values[k];
        if (lam <= cutoff) continue;
        const double f = std::pow(lam, power);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) out(i, j) += f * eig.vectors(i, k) * std::conj(eig.vectors(j, k));
    }
    return out;
}

int span_rank(const std::vector<CVec>& vectors, double tol) {
    const int n = static_cast<int>(vectors.size());
    Mat gram(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) gram(i, j) = inner(vectors[i], vectors[j]);
    const HermitianEig eig = hermitian_eig(gram);
    int rank = 0;
    for (double lam : eig.values)
        if (lam > tol) ++rank;
    return rank;
}

}  // namespace qkd
