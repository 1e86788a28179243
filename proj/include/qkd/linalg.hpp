#pragma once

#include <complex>
#include <vector>

namespace qkd {

using cx = std::complex<double>;
using CVec = std::vector<cx>;

// Dense row-major complex matrix. Every matrix in this project is tiny
// (dimension <= 16), so operations are plain loops.
class Mat {
public:
    Mat() = default;
    Mat(int rows, int cols) : rows_(rows), cols_(cols), a_(static_cast<size_t>(rows) * cols) {}

    static Mat identity(int n);
    static Mat from_rows(std::initializer_list<std::initializer_list<cx>> rows);

    int rows() const { return rows_; }
    int cols() const { return cols_; }

    cx& operator()(int i, int j) { return a_[static_cast<size_t>(i) * cols_ + j]; }
    const cx& operator()(int i, int j) const { return a_[static_cast<size_t>(i) * cols_ + j]; }

    Mat adjoint() const;
    cx trace() const;
    double frobenius_norm() const;
    bool is_hermitian(double tol) const;

    Mat& operator+=(const Mat& other);
    Mat& operator-=(const Mat& other);
    Mat& operator*=(cx scale);

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<cx> a_;
};

Mat operator+(Mat lhs, const Mat& rhs);
Mat operator-(Mat lhs, const Mat& rhs);
Mat operator*(const Mat& lhs, const Mat& rhs);
Mat operator*(cx scale, Mat m);
CVec operator*(const Mat& m, const CVec& v);

// Kronecker product, row-major index convention: (i_a, i_b) -> i_a * b.rows + i_b.
Mat kron(const Mat& a, const Mat& b);

// |u><v|
Mat outer(const CVec& u, const CVec& v);

// <u|v>
cx inner(const CVec& u, const CVec& v);
double vec_norm(const CVec& v);

// Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.
// values ascending; vectors holds the matching eigenvectors as columns.
struct HermitianEig {
    std::vector<double> values;
    Mat vectors;
};
HermitianEig hermitian_eig(const Mat& a);

double min_eigenvalue(const Mat& hermitian);

// f(A) for Hermitian PSD A with f(lambda) = lambda^power on eigenvalues above
// cutoff (relative to the largest), 0 below. Used for pseudo inverse square roots.
Mat psd_power(const Mat& a, double power, double relative_cutoff = 1e-12);

// Rank of the span of a set of vectors, via Gram-matrix eigenvalues above tol.
int span_rank(const std::vector<CVec>& vectors, double tol);

}  // namespace qkd
