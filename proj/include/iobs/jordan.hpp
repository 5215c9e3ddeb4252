#pragma once

#include "iobs/errors.hpp"
#include "iobs/linalg.hpp"
#include "iobs/model.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <utility>
#include <vector>

namespace iobs {

// One diagonal block of the real eigenstructure of F_no. size == 1 carries
// a real eigenvalue; size == 2 a conjugate pair r e^{+-i theta}, theta in
// (0, pi), realized as [[alpha, beta], [-beta, alpha]].
struct JordanBlock {
    Index offset = 0;
    Index size = 1;
    double lambda = 0.0; // real eigenvalue (size 1)
    double r = 0.0;      // modulus (size 2)
    double theta = 0.0;  // argument in (0, pi) (size 2)
};

// Time-varying change of coordinates P_t with P_t F_no P_t^-1-style
// dynamics replaced by the constant cooperative Lambda:
//   DT: Lambda = P_{t+1} F_no P_t^-1, Lambda non-negative and Schur;
//   CT: Lambda P_t = P_t' + P_t F_no, Lambda Metzler and Hurwitz.
// P_t = Q_t V^-1 where V collects (real) eigenvectors and Q_t is orthogonal
// (signs and planar rotations), so ||P_t|| + ||P_t^-1|| is constant.
struct JordanTransform {
    TimeDomain domain = TimeDomain::Discrete;
    Index n = 0;
    bool identity = false; // F_no already cooperative, P_t == I
    Matrix Lambda;
    Matrix V, V_inv;
    std::vector<JordanBlock> blocks;
    double sigma = 0.0; // ||P_t||_2 + ||P_t^-1||_2, same for every t
};

namespace detail {

inline double norm2(const Matrix& m) {
    if (m.rows() == 0 || m.cols() == 0) return 0.0;
    return Eigen::JacobiSVD<Matrix>(m).singularValues()(0);
}

inline Matrix rotation2(double angle) {
    Matrix r(2, 2);
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    r << c, -s, s, c;
    return r;
}

// DT sign factor (-1)^t for a negative real eigenvalue; t is an integer
// step index carried in a double.
inline double parity_sign(double t) {
    return (std::llround(t) % 2 == 0) ? 1.0 : -1.0;
}

} // namespace detail

// Restricted to (numerically) semisimple F_no: an eigenvector basis with
// condition number above cond_max raises NearDefective. The unobservable
// block of a detectable plant must already be stable; NotStable otherwise.
inline JordanTransform build_transform(const Matrix& f_no, TimeDomain domain,
                                       double cond_max = 1e6) {
    detail::require_square(f_no, "build_transform");
    JordanTransform jt;
    jt.domain = domain;
    jt.n = f_no.rows();
    if (jt.n == 0) {
        jt.identity = true;
        jt.Lambda.resize(0, 0);
        jt.V.resize(0, 0);
        jt.V_inv.resize(0, 0);
        return jt;
    }

    const bool stable =
        domain == TimeDomain::Discrete ? is_schur(f_no) : is_hurwitz(f_no);
    if (!stable)
        throw NotStable(std::string("F_no is not ") +
                        (domain == TimeDomain::Discrete ? "Schur" : "Hurwitz"));

    const bool cooperative =
        domain == TimeDomain::Discrete ? is_nonnegative(f_no) : is_metzler(f_no);
    if (cooperative) {
        jt.identity = true;
        jt.Lambda = f_no;
        jt.V = Matrix::Identity(jt.n, jt.n);
        jt.V_inv = jt.V;
        jt.sigma = 2.0;
        return jt;
    }

    Eigen::EigenSolver<Matrix> es(f_no, true);
    if (es.info() != Eigen::Success)
        throw NearDefective("eigensolver failed on F_no");
    const Eigen::VectorXcd evals = es.eigenvalues();
    const Eigen::MatrixXcd evecs = es.eigenvectors();

    // Deterministic order: by real part, then |imag|, then original index.
    std::vector<Index> order(static_cast<std::size_t>(jt.n));
    std::iota(order.begin(), order.end(), Index{0});
    std::sort(order.begin(), order.end(), [&](Index a, Index b) {
        const auto ka = std::make_tuple(evals(a).real(), std::abs(evals(a).imag()), a);
        const auto kb = std::make_tuple(evals(b).real(), std::abs(evals(b).imag()), b);
        return ka < kb;
    });

    jt.V = Matrix::Zero(jt.n, jt.n);
    Matrix j_real = Matrix::Zero(jt.n, jt.n); // block-diagonal real form
    jt.Lambda = Matrix::Zero(jt.n, jt.n);

    Index col = 0;
    for (std::size_t k = 0; k < order.size();) {
        const Index i = order[k];
        const std::complex<double> lam = evals(i);
        const double imag_tol = 1e-12 * (1.0 + std::abs(lam));
        if (std::abs(lam.imag()) <= imag_tol) {
            Vector v = evecs.col(i).real();
            Index imax = 0;
            v.cwiseAbs().maxCoeff(&imax);
            if (v(imax) != 0.0) v /= v(imax);
            jt.V.col(col) = v;
            j_real(col, col) = lam.real();
            JordanBlock blk;
            blk.offset = col;
            blk.size = 1;
            blk.lambda = lam.real();
            jt.Lambda(col, col) =
                domain == TimeDomain::Discrete ? std::abs(lam.real()) : lam.real();
            jt.blocks.push_back(blk);
            col += 1;
            k += 1;
            continue;
        }
        // Conjugate pair: the sort placed the partner adjacent.
        if (k + 1 >= order.size())
            throw NearDefective("unpaired complex eigenvalue in F_no");
        const Index ip = order[k + 1];
        if (std::abs(evals(ip) - std::conj(lam)) > 1e-6 * (1.0 + std::abs(lam)))
            throw NearDefective("complex eigenvalues of F_no do not pair as conjugates");
        const Index pos = lam.imag() > 0.0 ? i : ip;
        Eigen::VectorXcd v = evecs.col(pos);
        // Phase-normalize: largest-modulus entry becomes the real value 1.
        Index imax = 0;
        v.cwiseAbs().maxCoeff(&imax);
        if (std::abs(v(imax)) > 0.0) v /= v(imax);
        const std::complex<double> lp = evals(pos);
        const double alpha = lp.real();
        const double beta = lp.imag(); // > 0
        jt.V.col(col) = v.real();
        jt.V.col(col + 1) = v.imag();
        j_real(col, col) = alpha;
        j_real(col, col + 1) = beta;
        j_real(col + 1, col) = -beta;
        j_real(col + 1, col + 1) = alpha;
        JordanBlock blk;
        blk.offset = col;
        blk.size = 2;
        blk.r = std::abs(lp);
        blk.theta = std::atan2(beta, alpha); // in (0, pi)
        const double lam_entry = domain == TimeDomain::Discrete ? blk.r : alpha;
        jt.Lambda(col, col) = lam_entry;
        jt.Lambda(col + 1, col + 1) = lam_entry;
        jt.blocks.push_back(blk);
        col += 2;
        k += 2;
    }

    const double cond = [&] {
        Eigen::JacobiSVD<Matrix> svd(jt.V);
        const auto& sv = svd.singularValues();
        return sv(sv.size() - 1) > 0.0 ? sv(0) / sv(sv.size() - 1)
                                       : std::numeric_limits<double>::infinity();
    }();
    if (!(cond <= cond_max))
        throw NearDefective("eigenvector basis condition " + std::to_string(cond) +
                            " exceeds " + std::to_string(cond_max));
    try {
        jt.V_inv = invert(jt.V, 1.0 / cond_max);
    } catch (const NearSingular& e) {
        throw NearDefective(e.what());
    }
    const double recon = (jt.V * j_real * jt.V_inv - f_no).norm();
    if (recon > 1e-9 * (1.0 + f_no.norm()))
        throw NearDefective("real eigenstructure reconstruction residual " +
                            std::to_string(recon));
    jt.sigma = detail::norm2(jt.V_inv) + detail::norm2(jt.V);
    return jt;
}

// The orthogonal factor Q_t: identity on non-negative real directions,
// (-1)^t on negative real directions (DT), planar rotations on pairs.
inline Matrix transform_orthogonal_factor(const JordanTransform& jt, double t) {
    Matrix q = Matrix::Identity(jt.n, jt.n);
    for (const auto& blk : jt.blocks) {
        if (blk.size == 1) {
            if (jt.domain == TimeDomain::Discrete && blk.lambda < 0.0)
                q(blk.offset, blk.offset) = detail::parity_sign(t);
        } else {
            const double angle = jt.domain == TimeDomain::Discrete
                                     ? blk.theta * t
                                     : blk.r * std::sin(blk.theta) * t;
            q.block(blk.offset, blk.offset, 2, 2) = detail::rotation2(angle);
        }
    }
    return q;
}

// (P_t, P_t^-1). Exact products: P_t P_t^-1 differs from I only by the
// eigenvector-basis inversion error.
inline std::pair<Matrix, Matrix> transform_at(const JordanTransform& jt, double t) {
    if (jt.identity || jt.n == 0)
        return {Matrix::Identity(jt.n, jt.n), Matrix::Identity(jt.n, jt.n)};
    const Matrix q = transform_orthogonal_factor(jt, t);
    return {q * jt.V_inv, jt.V * q.transpose()};
}

// Analytic d/dt P_t for the CT commutation identity; zero for DT/identity cases.
inline Matrix transform_derivative_at(const JordanTransform& jt, double t) {
    Matrix dq = Matrix::Zero(jt.n, jt.n);
    if (jt.identity || jt.domain == TimeDomain::Discrete) return dq;
    for (const auto& blk : jt.blocks) {
        if (blk.size != 2) continue;
        const double beta = blk.r * std::sin(blk.theta);
        const double c = std::cos(beta * t);
        const double s = std::sin(beta * t);
        // d/dt R(beta t) = beta * [[-s, -c], [c, -s]]
        dq(blk.offset, blk.offset) = -beta * s;
        dq(blk.offset, blk.offset + 1) = -beta * c;
        dq(blk.offset + 1, blk.offset) = beta * c;
        dq(blk.offset + 1, blk.offset + 1) = -beta * s;
    }
    return dq * jt.V_inv;
}

} // namespace iobs
