#ifndef FEDSCALE_MATCORE_HPP
#define FEDSCALE_MATCORE_HPP

// Small dense symmetric / PSD matrix algebra and the Lyapunov solver.
//
// Matrices here are tiny (d up to a few hundred), so everything is built on a
// full symmetric eigendecomposition. SymMatrix is exactly symmetric: it is
// symmetrized as (M + M^T) / 2 on construction, and every numerically computed
// symmetric result goes back through that constructor.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "random.hpp"

namespace fedscale {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

class SymMatrix {
public:
    explicit SymMatrix(const Matrix& m)
    {
        if (m.rows() < 1 || m.rows() != m.cols()) {
            throw DimensionMismatch("SymMatrix needs a non-empty square matrix");
        }
        m_ = (m + m.transpose()) * 0.5;
    }

    static SymMatrix identity(Eigen::Index d) { return SymMatrix(Matrix::Identity(d, d)); }
    static SymMatrix zero(Eigen::Index d) { return SymMatrix(Matrix::Zero(d, d)); }

    static SymMatrix diagonal(std::span<const double> values)
    {
        Vector v = Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
        return SymMatrix(Matrix(v.asDiagonal()));
    }
    static SymMatrix diagonal(std::initializer_list<double> values)
    {
        return diagonal(std::span<const double>(values.begin(), values.size()));
    }

    Eigen::Index dim() const noexcept { return m_.rows(); }
    const Matrix& matrix() const noexcept { return m_; }
    double operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }

    friend SymMatrix operator+(const SymMatrix& a, const SymMatrix& b)
    {
        check_same_dim(a, b);
        return SymMatrix(a.m_ + b.m_);
    }
    friend SymMatrix operator-(const SymMatrix& a, const SymMatrix& b)
    {
        check_same_dim(a, b);
        return SymMatrix(a.m_ - b.m_);
    }
    friend SymMatrix operator*(double s, const SymMatrix& a) { return SymMatrix(s * a.m_); }
    friend SymMatrix operator*(const SymMatrix& a, double s) { return SymMatrix(s * a.m_); }
    friend SymMatrix operator/(const SymMatrix& a, double s) { return SymMatrix(a.m_ / s); }

private:
    static void check_same_dim(const SymMatrix& a, const SymMatrix& b)
    {
        if (a.dim() != b.dim()) {
            throw DimensionMismatch("symmetric matrices of different dimension");
        }
    }

    Matrix m_;
};

/// Square matrix without symmetry, e.g. C A^{-1}.
class GeneralMatrix {
public:
    explicit GeneralMatrix(Matrix m) : m_(std::move(m))
    {
        if (m_.rows() < 1 || m_.rows() != m_.cols()) {
            throw DimensionMismatch("GeneralMatrix needs a non-empty square matrix");
        }
    }
    GeneralMatrix(const SymMatrix& s) : m_(s.matrix()) {} // NOLINT: implicit widening is intended

    Eigen::Index dim() const noexcept { return m_.rows(); }
    const Matrix& matrix() const noexcept { return m_; }
    double operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }

private:
    Matrix m_;
};

/// Eigenvalues in non-increasing order with matching orthonormal eigenvectors.
struct SpectralForm {
    Vector eigenvalues;
    Matrix eigenvectors;

    double max_eigenvalue() const { return eigenvalues[0]; }
    double min_eigenvalue() const { return eigenvalues[eigenvalues.size() - 1]; }
};

inline SpectralForm spectral(const SymMatrix& m)
{
    Eigen::SelfAdjointEigenSolver<Matrix> solver(m.matrix());
    if (solver.info() != Eigen::Success) {
        throw Error("symmetric eigensolver did not converge");
    }
    const Eigen::Index d = m.dim();
    SpectralForm out{Vector(d), Matrix(d, d)};
    for (Eigen::Index i = 0; i < d; ++i) {
        out.eigenvalues[i] = solver.eigenvalues()[d - 1 - i];
        out.eigenvectors.col(i) = solver.eigenvectors().col(d - 1 - i);
    }
    return out;
}

inline SymMatrix reconstruct(const SpectralForm& s)
{
    return SymMatrix(s.eigenvectors * s.eigenvalues.asDiagonal() * s.eigenvectors.transpose());
}

inline double spectral_norm(const SymMatrix& m)
{
    const SpectralForm s = spectral(m);
    return std::max(std::abs(s.max_eigenvalue()), std::abs(s.min_eigenvalue()));
}

inline double spectral_norm(const GeneralMatrix& m)
{
    Eigen::JacobiSVD<Matrix> svd(m.matrix());
    return svd.singularValues()[0];
}

inline double frobenius_norm(const SymMatrix& m) { return m.matrix().norm(); }

/// Relative Frobenius distance ||a - b|| / max(||b||, tiny).
inline double relative_frobenius(const Matrix& a, const Matrix& b)
{
    const double denom = std::max(b.norm(), std::numeric_limits<double>::min());
    return (a - b).norm() / denom;
}

/// True iff the smallest eigenvalue is >= -tol * max(1, ||M||_2).
inline bool check_psd(const SymMatrix& m, double tol = 1e-10)
{
    const SpectralForm s = spectral(m);
    const double norm = std::max(std::abs(s.max_eigenvalue()), std::abs(s.min_eigenvalue()));
    return s.min_eigenvalue() >= -tol * std::max(1.0, norm);
}

/// Strict definiteness at the library-wide relative threshold 1e-14.
inline bool is_strictly_pd(const SymMatrix& m)
{
    const SpectralForm s = spectral(m);
    const double norm = std::max(std::abs(s.max_eigenvalue()), std::abs(s.min_eigenvalue()));
    return s.min_eigenvalue() > 1e-14 * norm;
}

/// Principal square root B of a PSD matrix, so that B B^T = C.
/// Eigenvalues within the PSD tolerance below zero are clamped to zero.
inline SymMatrix factor_psd(const SymMatrix& c)
{
    if (!check_psd(c, 1e-10)) {
        throw NotPsd("factor_psd: matrix has a negative eigenvalue beyond tolerance");
    }
    const SpectralForm s = spectral(c);
    Vector root = s.eigenvalues.cwiseMax(0.0).cwiseSqrt();
    return SymMatrix(s.eigenvectors * root.asDiagonal() * s.eigenvectors.transpose());
}

inline double trace(const SymMatrix& m) { return m.matrix().trace(); }
inline double trace(const GeneralMatrix& m) { return m.matrix().trace(); }

/// Natural log-determinant of a strictly positive-definite matrix.
inline double log_det(const SymMatrix& m)
{
    const SpectralForm s = spectral(m);
    const double norm = std::max(std::abs(s.max_eigenvalue()), std::abs(s.min_eigenvalue()));
    if (!(s.min_eigenvalue() > 1e-14 * norm)) {
        throw SingularMatrix("log_det: matrix is not strictly positive definite");
    }
    return s.eigenvalues.array().log().sum();
}

inline void require_strictly_pd(const SymMatrix& a, const char* what)
{
    const SpectralForm s = spectral(a);
    const double norm = std::max(std::abs(s.max_eigenvalue()), std::abs(s.min_eigenvalue()));
    if (s.min_eigenvalue() < -1e-10 * std::max(1.0, norm)) {
        throw NotPsd(std::string(what) + ": matrix is indefinite");
    }
    if (!(s.min_eigenvalue() > 1e-14 * norm)) {
        throw SingularMatrix(std::string(what) + ": matrix is singular");
    }
}

/// C A^{-1} for symmetric C and strictly PD A.
inline GeneralMatrix product_with_inverse(const SymMatrix& c, const SymMatrix& a)
{
    if (c.dim() != a.dim()) {
        throw DimensionMismatch("product_with_inverse: dimension mismatch");
    }
    require_strictly_pd(a, "product_with_inverse");
    Eigen::LLT<Matrix> llt(a.matrix());
    // (A^{-1} C)^T = C A^{-1} because both factors are symmetric.
    return GeneralMatrix(Matrix(llt.solve(c.matrix()).transpose()));
}

/// Trace and log-determinant of C A^{-1}, the two scalars every bound needs.
struct RatioTerms {
    double trace = 0.0;
    double log_det = 0.0;
};

inline RatioTerms ratio_terms(const SymMatrix& c, const SymMatrix& a)
{
    const GeneralMatrix prod = product_with_inverse(c, a);
    return RatioTerms{fedscale::trace(prod), log_det(c) - log_det(a)};
}

/// Solves A X + X A = rhs for symmetric X, with A strictly positive definite.
/// Works in the eigenbasis of A, where X'_ij = rhs'_ij / (l_i + l_j).
inline SymMatrix solve_lyapunov(const SymMatrix& a, const SymMatrix& rhs)
{
    if (a.dim() != rhs.dim()) {
        throw DimensionMismatch("solve_lyapunov: dimension mismatch");
    }
    const SpectralForm s = spectral(a);
    const double norm = std::max(std::abs(s.max_eigenvalue()), std::abs(s.min_eigenvalue()));
    if (!(s.min_eigenvalue() > 1e-14 * norm)) {
        throw SingularMatrix("solve_lyapunov: drift matrix is not strictly positive definite");
    }
    const Matrix& v = s.eigenvectors;
    Matrix rotated = v.transpose() * rhs.matrix() * v;
    const Eigen::Index d = a.dim();
    for (Eigen::Index j = 0; j < d; ++j) {
        for (Eigen::Index i = 0; i < d; ++i) {
            rotated(i, j) /= s.eigenvalues[i] + s.eigenvalues[j];
        }
    }
    return SymMatrix(v * rotated * v.transpose());
}

inline double lyapunov_residual(const SymMatrix& a, const SymMatrix& x, const SymMatrix& rhs)
{
    return (a.matrix() * x.matrix() + x.matrix() * a.matrix() - rhs.matrix()).norm();
}

/// Haar-distributed orthogonal matrix from QR of a Gaussian matrix.
inline Matrix random_orthogonal(Eigen::Index d, Rng& rng)
{
    const Matrix g = standard_normal_matrix(d, d, rng);
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix q = qr.householderQ() * Matrix::Identity(d, d);
    const Matrix r = qr.matrixQR();
    for (Eigen::Index i = 0; i < d; ++i) {
        if (r(i, i) < 0.0) {
            q.col(i) *= -1.0;
        }
    }
    return q;
}

inline Matrix random_orthogonal(Eigen::Index d, std::uint64_t seed)
{
    Rng rng = substream(seed, 0);
    return random_orthogonal(d, rng);
}

struct CommutingPair {
    SymMatrix a;
    SymMatrix c;
};

/// Symmetric A and C sharing a random eigenbasis drawn from `rotation_seed`.
inline CommutingPair commuting_pair(std::span<const double> eigs_a, std::span<const double> eigs_c,
                                    std::uint64_t rotation_seed)
{
    if (eigs_a.size() != eigs_c.size() || eigs_a.empty()) {
        throw DimensionMismatch("commuting_pair: spectra must be non-empty and of equal length");
    }
    for (double v : eigs_a) {
        if (!(v > 0.0)) {
            throw BadSpectrum("commuting_pair: hessian eigenvalues must be strictly positive");
        }
    }
    for (double v : eigs_c) {
        if (!(v >= 0.0)) {
            throw BadSpectrum("commuting_pair: noise eigenvalues must be non-negative");
        }
    }
    const auto d = static_cast<Eigen::Index>(eigs_a.size());
    const Matrix q = random_orthogonal(d, rotation_seed);
    const Vector la = Eigen::Map<const Vector>(eigs_a.data(), d);
    const Vector lc = Eigen::Map<const Vector>(eigs_c.data(), d);
    return CommutingPair{SymMatrix(q * la.asDiagonal() * q.transpose()),
                         SymMatrix(q * lc.asDiagonal() * q.transpose())};
}

inline CommutingPair commuting_pair(std::initializer_list<double> eigs_a, std::initializer_list<double> eigs_c,
                                    std::uint64_t rotation_seed)
{
    return commuting_pair(std::span<const double>(eigs_a.begin(), eigs_a.size()),
                          std::span<const double>(eigs_c.begin(), eigs_c.size()), rotation_seed);
}

/// Random SPD matrix with eigenvalues drawn uniformly from [lo, hi].
inline SymMatrix random_spd(Eigen::Index d, Rng& rng, double lo, double hi)
{
    std::uniform_real_distribution<double> unif(lo, hi);
    Vector l(d);
    for (Eigen::Index i = 0; i < d; ++i) {
        l[i] = unif(rng);
    }
    const Matrix q = random_orthogonal(d, rng);
    return SymMatrix(q * l.asDiagonal() * q.transpose());
}

inline bool commutes(const Matrix& a, const Matrix& b, double tol)
{
    const double scale = std::max(1.0, a.norm() * b.norm());
    return (a * b - b * a).cwiseAbs().maxCoeff() <= tol * scale;
}

} // namespace fedscale

#endif // FEDSCALE_MATCORE_HPP
