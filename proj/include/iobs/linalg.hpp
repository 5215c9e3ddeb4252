#pragma once

#include "iobs/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <utility>

namespace iobs {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

namespace detail {

inline void require_square(const Matrix& m, const char* who) {
    if (m.rows() != m.cols())
        throw ValidationError(std::string(who) + ": matrix must be square, got " +
                              std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
}

} // namespace detail

// =====================================================================
// Entrywise positive/negative split
// =====================================================================

// M = plus - minus with plus = max(M, 0) and minus = max(-M, 0).
// Both parts are entrywise non-negative and min(plus, minus) = 0.
inline std::pair<Matrix, Matrix> pos_neg_split(const Matrix& m) {
    Matrix plus = m.cwiseMax(0.0);
    Matrix minus = plus - m;
    return {std::move(plus), std::move(minus)};
}

inline Matrix pos_part(const Matrix& m) { return m.cwiseMax(0.0); }
inline Matrix neg_part(const Matrix& m) { return (-m).cwiseMax(0.0); }

// =====================================================================
// Interval image of a box under a linear map
// =====================================================================

// An axis-aligned box, upper bound first everywhere in this library.
struct Box {
    Vector upper, lower;

    Vector width() const { return upper - lower; }
    bool ordered(double tol = 0.0) const {
        return (lower.array() <= upper.array() + tol).all();
    }
};

// Componentwise-tight enclosure of { A v : lower <= v <= upper }:
//   out.lower = A+ lower - A- upper,  out.upper = A+ upper - A- lower.
inline Box interval_image(const Matrix& a, const Vector& lower, const Vector& upper) {
    if (lower.size() != a.cols() || upper.size() != a.cols())
        throw ValidationError("interval_image: bound size does not match matrix columns");
    if (!(lower.array() <= upper.array()).all())
        throw ValidationError("interval_image: lower bound exceeds upper bound");
    auto [plus, minus] = pos_neg_split(a);
    Vector hi = plus * upper - minus * lower;
    Vector lo = plus * lower - minus * upper;
    return {std::move(hi), std::move(lo)};
}

inline Box interval_image(const Matrix& a, const Box& box) {
    return interval_image(a, box.lower, box.upper);
}

// =====================================================================
// Numerical rank and kernel
// =====================================================================

// Singular values below rel_tol * sigma_max count as zero.
inline Index numerical_rank(const Eigen::JacobiSVD<Matrix>& svd, double rel_tol) {
    const auto& sv = svd.singularValues();
    if (sv.size() == 0) return 0;
    const double smax = sv(0);
    if (smax <= 0.0) return 0;
    Index rank = 0;
    for (Index i = 0; i < sv.size(); ++i)
        if (sv(i) >= rel_tol * smax) ++rank;
    return rank;
}

// Orthonormal basis of the null space of m, one column per kernel dimension.
// Returns an n x 0 matrix when m has full column rank.
inline Matrix kernel_basis(const Matrix& m, double rel_tol = 1e-9) {
    Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeFullV);
    const Index rank = numerical_rank(svd, rel_tol);
    const Index n = m.cols();
    return svd.matrixV().rightCols(n - rank);
}

// =====================================================================
// Spectrum and stability predicates
// =====================================================================

struct SpectrumReport {
    Eigen::VectorXcd eigenvalues; // unordered, as returned by the solver
    double spectral_radius = 0.0;
    double max_real_part = -std::numeric_limits<double>::infinity();
};

inline SpectrumReport spectrum(const Matrix& m) {
    detail::require_square(m, "spectrum");
    SpectrumReport rep;
    if (m.rows() == 0) return rep;
    rep.eigenvalues = m.eigenvalues();
    for (Index i = 0; i < rep.eigenvalues.size(); ++i) {
        rep.spectral_radius = std::max(rep.spectral_radius, std::abs(rep.eigenvalues(i)));
        rep.max_real_part = std::max(rep.max_real_part, rep.eigenvalues(i).real());
    }
    return rep;
}

inline bool is_nonnegative(const Matrix& m) { return (m.array() >= 0.0).all(); }

// Metzler: every off-diagonal entry non-negative.
inline bool is_metzler(const Matrix& m) {
    detail::require_square(m, "is_metzler");
    for (Index i = 0; i < m.rows(); ++i)
        for (Index j = 0; j < m.cols(); ++j)
            if (i != j && m(i, j) < 0.0) return false;
    return true;
}

// max Re(lambda) < -margin. Empty matrices are vacuously stable.
inline bool is_hurwitz(const Matrix& m, double margin = 0.0) {
    detail::require_square(m, "is_hurwitz");
    if (m.rows() == 0) return true;
    return spectrum(m).max_real_part < -margin;
}

// rho(M) < 1 - margin. Empty matrices are vacuously stable.
inline bool is_schur(const Matrix& m, double margin = 0.0) {
    detail::require_square(m, "is_schur");
    if (m.rows() == 0) return true;
    return spectrum(m).spectral_radius < 1.0 - margin;
}

// =====================================================================
// Inverse with conditioning guard
// =====================================================================

// Reciprocal condition number sigma_min / sigma_max (0 for singular input).
inline double rcond(const Matrix& m) {
    detail::require_square(m, "rcond");
    if (m.rows() == 0) return 1.0;
    Eigen::JacobiSVD<Matrix> svd(m);
    const auto& sv = svd.singularValues();
    if (sv(0) <= 0.0) return 0.0;
    return sv(sv.size() - 1) / sv(0);
}

// Throws NearSingular when the reciprocal condition estimate drops below
// rcond_min. The SVD-based solve keeps ||M M^-1 - I|| at the level of
// machine epsilon times the condition number.
inline Matrix invert(const Matrix& m, double rcond_min = 1e-9) {
    detail::require_square(m, "invert");
    if (m.rows() == 0) return m;
    Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    const double rc = sv(0) > 0.0 ? sv(sv.size() - 1) / sv(0) : 0.0;
    if (rc < rcond_min)
        throw NearSingular("reciprocal condition " + std::to_string(rc) + " below " +
                           std::to_string(rcond_min));
    return svd.solve(Matrix::Identity(m.rows(), m.cols()));
}

// =====================================================================
// Sylvester equation P X + X Q = R
// =====================================================================

namespace detail {

// Direct solve of the vectorized system (I (x) P + Q^T (x) I) vec(X) = vec(R).
// Exact small-scale path; the system is pq x pq.
inline Matrix sylvester_kronecker(const Matrix& p, const Matrix& q, const Matrix& r) {
    const Index np = p.rows();
    const Index nq = q.rows();
    Matrix sys = Matrix::Zero(np * nq, np * nq);
    for (Index j = 0; j < nq; ++j)
        sys.block(j * np, j * np, np, np) = p;
    for (Index j = 0; j < nq; ++j)
        for (Index k = 0; k < nq; ++k)
            sys.block(j * np, k * np, np, np).diagonal().array() += q(k, j);
    Eigen::Map<const Vector> rhs(r.data(), np * nq);
    Vector x = sys.partialPivLu().solve(rhs);
    return Eigen::Map<const Matrix>(x.data(), np, nq);
}

// Complex Schur reduction: triangularize both coefficients, then solve the
// triangular system entrywise (rows bottom-up, columns left-to-right).
inline Matrix sylvester_schur(const Matrix& p, const Matrix& q, const Matrix& r) {
    using CMatrix = Eigen::MatrixXcd;
    Eigen::ComplexSchur<CMatrix> sp(p.cast<std::complex<double>>(), true);
    Eigen::ComplexSchur<CMatrix> sq(q.cast<std::complex<double>>(), true);
    const CMatrix& s = sp.matrixT(); // upper triangular
    const CMatrix& t = sq.matrixT();
    const CMatrix& u = sp.matrixU();
    const CMatrix& v = sq.matrixU();
    CMatrix rt = u.adjoint() * r.cast<std::complex<double>>() * v;
    const Index np = p.rows();
    const Index nq = q.rows();
    CMatrix y(np, nq);
    for (Index i = np - 1; i >= 0; --i) {
        for (Index j = 0; j < nq; ++j) {
            std::complex<double> acc = rt(i, j);
            for (Index k = i + 1; k < np; ++k) acc -= s(i, k) * y(k, j);
            for (Index k = 0; k < j; ++k) acc -= y(i, k) * t(k, j);
            y(i, j) = acc / (s(i, i) + t(j, j));
        }
    }
    return (u * y * v.adjoint()).real();
}

} // namespace detail

// Unique solution exists iff no eigenvalue of P is the negative of an
// eigenvalue of Q; overlap within tolerance raises SpectraOverlap.
inline Matrix solve_sylvester(const Matrix& p, const Matrix& q, const Matrix& r) {
    detail::require_square(p, "solve_sylvester");
    detail::require_square(q, "solve_sylvester");
    if (r.rows() != p.rows() || r.cols() != q.cols())
        throw ValidationError("solve_sylvester: right-hand side is " + std::to_string(r.rows()) +
                              "x" + std::to_string(r.cols()) + ", expected " +
                              std::to_string(p.rows()) + "x" + std::to_string(q.cols()));
    const auto ep = spectrum(p).eigenvalues;
    const auto eq = spectrum(q).eigenvalues;
    for (Index i = 0; i < ep.size(); ++i) {
        for (Index j = 0; j < eq.size(); ++j) {
            const double gap = std::abs(ep(i) + eq(j));
            const double scale = 1.0 + std::max(std::abs(ep(i)), std::abs(eq(j)));
            if (gap <= 1e-9 * scale)
                throw SpectraOverlap("eigenvalue " + std::to_string(ep(i).real()) +
                                     (ep(i).imag() >= 0 ? "+" : "") + std::to_string(ep(i).imag()) +
                                     "i of P cancels an eigenvalue of Q");
        }
    }
    if (std::max(p.rows(), q.rows()) <= 12)
        return detail::sylvester_kronecker(p, q, r);
    return detail::sylvester_schur(p, q, r);
}

inline double sylvester_residual(const Matrix& p, const Matrix& q, const Matrix& r,
                                 const Matrix& x) {
    return (p * x + x * q - r).norm();
}

} // namespace iobs
