#pragma once

#include "iobs/errors.hpp"
#include "iobs/linalg.hpp"
#include "iobs/model.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <utility>
#include <vector>

namespace iobs {

// How the change-of-basis M = [M_o M_no] is chosen. Both span the same
// subspaces; pivot reproduces hand-computed selections of state variables,
// orthonormal optimizes conditioning.
enum class BasisStrategy { Pivot, Orthonormal };

inline const char* to_string(BasisStrategy s) {
    return s == BasisStrategy::Pivot ? "pivot" : "orthonormal";
}

// Coordinates z = N x with z_o observable (dim n_o) and z_no unobservable
// (dim n_no). In the new basis the dynamics are block lower triangular:
//   z_o^+  = F_o z_o + N_o (u + D d)
//   z_no^+ = F_noo z_o + F_no z_no + N_no (u + D d)
//   y      = H_o z_o + W w
struct ObservabilityDecomposition {
    TimeDomain domain = TimeDomain::Discrete;
    Index n_o = 0, n_no = 0;
    Matrix O;            // stacked observability matrix of (F, H)
    Matrix M_o, M_no, M; // basis columns, M = [M_o M_no]
    Matrix N, N_o, N_no; // N = M^-1, split into the first n_o / last n_no rows
    Matrix F_o, F_noo, F_no;
    Matrix D_o, D_no;
    Matrix H_o;
};

// Rows H, HF, ..., H F^(n_x - 1) stacked top to bottom.
inline Matrix observability_matrix(const Matrix& f, const Matrix& h) {
    detail::require_square(f, "observability_matrix");
    if (h.cols() != f.rows())
        throw ValidationError("observability_matrix: H column count must equal n_x");
    const Index n = f.rows();
    const Index ny = h.rows();
    Matrix o(ny * n, n);
    Matrix block = h;
    for (Index k = 0; k < n; ++k) {
        o.middleRows(k * ny, ny) = block;
        if (k + 1 < n) block = block * f;
    }
    return o;
}

namespace detail {

// Unit vectors at the pivot columns of O (ascending), so the observable
// coordinates are a subset of the original state variables.
inline Matrix pivot_observable_basis(const Matrix& o, Index rank) {
    Eigen::ColPivHouseholderQR<Matrix> qr(o);
    const auto& perm = qr.colsPermutation().indices();
    std::vector<Index> cols(perm.data(), perm.data() + rank);
    std::sort(cols.begin(), cols.end());
    Matrix m_o = Matrix::Zero(o.cols(), rank);
    for (Index j = 0; j < rank; ++j) m_o(cols[static_cast<std::size_t>(j)], j) = 1.0;
    return m_o;
}

// Rescale each column so its largest-magnitude entry becomes +1; keeps the
// span, makes hand-checkable kernels (like a plain unit vector) exact.
inline Matrix rescale_columns(Matrix m) {
    for (Index j = 0; j < m.cols(); ++j) {
        Index imax = 0;
        m.col(j).cwiseAbs().maxCoeff(&imax);
        const double pivot = m(imax, j);
        if (pivot != 0.0) m.col(j) /= pivot;
    }
    return m;
}

} // namespace detail

// Observability decomposition of a validated system. Requires a non-zero
// observable rank; requires the unobservable block to be stable in the
// system's domain (detectability). n_no = 0 (fully observable) is allowed
// and produces empty non-observable blocks.
inline ObservabilityDecomposition decompose(const LtiSystem& sys, double rel_tol = 1e-9,
                                            BasisStrategy strategy = BasisStrategy::Pivot,
                                            double rcond_min = 1e-9) {
    ObservabilityDecomposition dec;
    dec.domain = sys.domain;
    dec.O = observability_matrix(sys.F, sys.H);
    const Index n = sys.n_x();

    Eigen::JacobiSVD<Matrix> svd(dec.O, Eigen::ComputeFullV);
    dec.n_o = numerical_rank(svd, rel_tol);
    dec.n_no = n - dec.n_o;
    if (dec.n_o == 0)
        throw ZeroObservableRank("observability matrix has numerical rank 0");

    if (strategy == BasisStrategy::Pivot) {
        dec.M_o = detail::pivot_observable_basis(dec.O, dec.n_o);
        dec.M_no = detail::rescale_columns(svd.matrixV().rightCols(dec.n_no));
    } else {
        dec.M_o = svd.matrixV().leftCols(dec.n_o);
        dec.M_no = svd.matrixV().rightCols(dec.n_no);
    }

    dec.M.resize(n, n);
    dec.M.leftCols(dec.n_o) = dec.M_o;
    dec.M.rightCols(dec.n_no) = dec.M_no;
    dec.N = invert(dec.M, rcond_min);
    dec.N_o = dec.N.topRows(dec.n_o);
    dec.N_no = dec.N.bottomRows(dec.n_no);

    dec.F_o = dec.N_o * sys.F * dec.M_o;
    dec.F_noo = dec.N_no * sys.F * dec.M_o;
    dec.F_no = dec.N_no * sys.F * dec.M_no;
    dec.D_o = dec.N_o * sys.D;
    dec.D_no = dec.N_no * sys.D;
    dec.H_o = sys.H * dec.M_o;

    if (dec.n_no > 0) {
        const bool stable = sys.domain == TimeDomain::Discrete ? is_schur(dec.F_no)
                                                               : is_hurwitz(dec.F_no);
        if (!stable)
            throw NotDetectable("unobservable block is not " +
                                std::string(sys.domain == TimeDomain::Discrete ? "Schur"
                                                                               : "Hurwitz"));
    }
    return dec;
}

// Residual certificates for a decomposition against the plant it came from.
struct CertificateReport {
    double basis_residual = 0.0;      // ||N M - I||
    double kernel_residual = 0.0;     // ||O M_no||
    double output_residual = 0.0;     // ||H M_no||
    double coupling_residual = 0.0;   // ||N_o F M_no||
    Index observable_rank = 0;        // rank of the (F_o, H_o) observability matrix
    bool observable_pair_full = false;
    bool stable_unobservable = false; // vacuously true when n_no = 0
    bool pass = false;
};

inline CertificateReport verify_decomposition(const ObservabilityDecomposition& dec,
                                              const LtiSystem& sys, double tol = 1e-9) {
    CertificateReport rep;
    const Index n = sys.n_x();
    rep.basis_residual = (dec.N * dec.M - Matrix::Identity(n, n)).norm();
    rep.kernel_residual = dec.n_no > 0 ? (dec.O * dec.M_no).norm() : 0.0;
    rep.output_residual = dec.n_no > 0 ? (sys.H * dec.M_no).norm() : 0.0;
    rep.coupling_residual = dec.n_no > 0 ? (dec.N_o * sys.F * dec.M_no).norm() : 0.0;
    Eigen::JacobiSVD<Matrix> svd(observability_matrix(dec.F_o, dec.H_o));
    rep.observable_rank = numerical_rank(svd, 1e-9);
    rep.observable_pair_full = rep.observable_rank == dec.n_o;
    rep.stable_unobservable =
        dec.n_no == 0 || (sys.domain == TimeDomain::Discrete ? is_schur(dec.F_no)
                                                             : is_hurwitz(dec.F_no));
    const double scale = 1.0 + sys.F.norm();
    rep.pass = rep.basis_residual <= tol && rep.kernel_residual <= tol * scale &&
               rep.output_residual <= tol * scale && rep.coupling_residual <= tol * scale &&
               rep.observable_pair_full && rep.stable_unobservable;
    return rep;
}

} // namespace iobs
