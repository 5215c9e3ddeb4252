#pragma once

#include "iobs/decomposition.hpp"
#include "iobs/errors.hpp"
#include "iobs/linalg.hpp"
#include "iobs/signal.hpp"

#include <cmath>
#include <optional>
#include <string>
#include <utility>

namespace iobs {

// Change of variables zeta = T z_o turning the observable error dynamics
// into the cooperative matrix A_o, via  T F_o = A_o T + B_o H_o.
// All split products the observer needs are precomputed here.
struct SylvesterDesign {
    TimeDomain domain = TimeDomain::Discrete;
    Index n_o = 0, n_y = 0;
    Matrix A_o; // Metzler + Hurwitz (CT) or non-negative + Schur (DT)
    Matrix B_o;
    Matrix T, T_inv;
    Matrix gain;                    // T^-1 B_o, output-injection gain
    Matrix dist_plus, dist_minus;   // T^-1 (T D_o)^+/-
    Matrix noise_plus, noise_minus; // T^-1 (B_o W)^-/+  (upper observer pairs
                                    // the negative part with the upper bound)
    Matrix init_plus, init_minus;   // T^-1 (T N_o)^+/-
    Matrix bound_plus, bound_minus; // (T^-1)^+/- T
    double sylvester_residual = 0.0;
    double t_rcond = 0.0;
};

namespace detail {

// Push a candidate diagonal entry off any eigenvalue of F_o (and off the
// entries already placed) in steps of 2^-20 until it clears 1e-9.
inline double clear_collisions(double entry, const Eigen::VectorXcd& spectrum_fo,
                               const Vector& placed, Index n_placed) {
    const double step = std::ldexp(1.0, -20);
    bool moved = true;
    while (moved) {
        moved = false;
        for (Index i = 0; i < spectrum_fo.size(); ++i) {
            if (std::abs(std::complex<double>(entry, 0.0) - spectrum_fo(i)) <= 1e-9) {
                entry += step;
                moved = true;
            }
        }
        for (Index i = 0; i < n_placed; ++i) {
            if (std::abs(entry - placed(i)) <= 1e-9) {
                entry += step;
                moved = true;
            }
        }
    }
    return entry;
}

inline std::pair<Matrix, Matrix> default_gains_impl(const Matrix& f_o, const Matrix& h_o,
                                                    TimeDomain domain, std::uint64_t seed,
                                                    double shift) {
    const Index n_o = f_o.rows();
    const Index n_y = h_o.rows();
    const auto spec_fo = spectrum(f_o).eigenvalues;
    Vector diag(n_o);
    for (Index k = 0; k < n_o; ++k) {
        double entry = domain == TimeDomain::Discrete
                           ? static_cast<double>(k + 1) / static_cast<double>(n_o + 1) * 0.9
                           : -static_cast<double>(k + 1);
        entry += shift;
        diag(k) = clear_collisions(entry, spec_fo, diag, k);
    }
    Matrix a_o = diag.asDiagonal();
    Matrix b_o(n_o, n_y);
    if (n_y == 1) {
        b_o.setOnes();
    } else {
        Rng rng(seed);
        for (Index i = 0; i < n_o; ++i)
            for (Index j = 0; j < n_y; ++j) b_o(i, j) = rng.uniform(-1.0, 1.0);
    }
    return {std::move(a_o), std::move(b_o)};
}

} // namespace detail

// Stable cooperative diagonal A_o spread over the domain's stability region
// plus a generic B_o (all ones for single-output plants, seeded draws
// otherwise).
inline std::pair<Matrix, Matrix> default_gains(const Matrix& f_o, const Matrix& h_o,
                                               TimeDomain domain, std::uint64_t seed = 0) {
    return detail::default_gains_impl(f_o, h_o, domain, seed, 0.0);
}

inline void refresh_design_products(SylvesterDesign& d, const ObservabilityDecomposition& dec,
                                    const Matrix& w, double rcond_min);

// Solve for T and precompute every split product. Throws InvalidGains when
// A_o is not cooperative-stable for the domain, SpectraOverlap when A_o and
// F_o share spectrum, NearSingularT when T fails the conditioning guard.
inline SylvesterDesign build_design(const ObservabilityDecomposition& dec, const Matrix& a_o,
                                    const Matrix& b_o, const Matrix& w,
                                    double rcond_min = 1e-9) {
    SylvesterDesign d;
    d.domain = dec.domain;
    d.n_o = dec.n_o;
    d.n_y = dec.H_o.rows();
    if (a_o.rows() != dec.n_o || a_o.cols() != dec.n_o)
        throw ValidationError("build_design: A_o must be n_o x n_o");
    if (b_o.rows() != dec.n_o || b_o.cols() != d.n_y)
        throw ValidationError("build_design: B_o must be n_o x n_y");
    if (w.rows() != d.n_y)
        throw ValidationError("build_design: W row count must equal n_y");

    if (dec.domain == TimeDomain::Discrete) {
        if (!is_nonnegative(a_o)) throw InvalidGains("A_o must be entrywise non-negative");
        if (!is_schur(a_o)) throw InvalidGains("A_o must be Schur stable");
    } else {
        if (!is_metzler(a_o)) throw InvalidGains("A_o must be Metzler");
        if (!is_hurwitz(a_o)) throw InvalidGains("A_o must be Hurwitz stable");
    }

    d.A_o = a_o;
    d.B_o = b_o;
    const Matrix rhs = b_o * dec.H_o;
    d.T = solve_sylvester(-a_o, dec.F_o, rhs);
    d.sylvester_residual = (d.T * dec.F_o - a_o * d.T - rhs).norm();
    if (d.sylvester_residual > 1e-10 * (1.0 + rhs.norm()))
        throw DesignError("SylvesterResidual",
                          "transform residual " + std::to_string(d.sylvester_residual));
    refresh_design_products(d, dec, w, rcond_min);
    return d;
}

// Recompute T^-1 and every split product from the current T. Factored out
// so diagnostics can rebuild a deliberately perturbed design consistently.
inline void refresh_design_products(SylvesterDesign& d, const ObservabilityDecomposition& dec,
                                    const Matrix& w, double rcond_min = 1e-9) {
    d.t_rcond = rcond(d.T);
    try {
        d.T_inv = invert(d.T, rcond_min);
    } catch (const NearSingular& e) {
        throw NearSingularT(e.what());
    }
    d.gain = d.T_inv * d.B_o;
    const Matrix td_o = d.T * dec.D_o;
    d.dist_plus = d.T_inv * pos_part(td_o);
    d.dist_minus = d.T_inv * neg_part(td_o);
    const Matrix b_ow = d.B_o * w;
    d.noise_plus = d.T_inv * neg_part(b_ow);
    d.noise_minus = d.T_inv * pos_part(b_ow);
    const Matrix tn_o = d.T * dec.N_o;
    d.init_plus = d.T_inv * pos_part(tn_o);
    d.init_minus = d.T_inv * neg_part(tn_o);
    d.bound_plus = pos_part(d.T_inv) * d.T;
    d.bound_minus = neg_part(d.T_inv) * d.T;
}

struct DesignOverrides {
    std::optional<Matrix> A_o;
    std::optional<Matrix> B_o;
};

// Design with user gains when given, otherwise defaults with up to 10
// retries (fresh B_o draws and a 2^-20 diagonal shift per attempt).
inline SylvesterDesign make_design(const ObservabilityDecomposition& dec, const Matrix& w,
                                   const DesignOverrides& overrides = {}, std::uint64_t seed = 0,
                                   double rcond_min = 1e-9) {
    if (overrides.A_o && overrides.B_o)
        return build_design(dec, *overrides.A_o, *overrides.B_o, w, rcond_min);

    const double step = std::ldexp(1.0, -20);
    for (int attempt = 0;; ++attempt) {
        auto [a_def, b_def] =
            detail::default_gains_impl(dec.F_o, dec.H_o, dec.domain, derive_seed(seed, attempt),
                                       attempt * step);
        const Matrix& a_o = overrides.A_o ? *overrides.A_o : a_def;
        const Matrix& b_o = overrides.B_o ? *overrides.B_o : b_def;
        try {
            return build_design(dec, a_o, b_o, w, rcond_min);
        } catch (const DesignError&) {
            if (attempt >= 9) throw;
        }
    }
}

// Transformed initial observer states from the initial box (split of T N_o
// routed back through T^-1).
inline Box zo_initial_state(const SylvesterDesign& d, const Vector& x0_upper,
                            const Vector& x0_lower) {
    Vector up = d.init_plus * x0_upper - d.init_minus * x0_lower;
    Vector lo = d.init_plus * x0_lower - d.init_minus * x0_upper;
    return {std::move(up), std::move(lo)};
}

// Reported z_o bounds at time 0: direct split of N_o over the initial box.
inline Box zo_initial_bounds(const ObservabilityDecomposition& dec, const Vector& x0_upper,
                             const Vector& x0_lower) {
    return interval_image(dec.N_o, x0_lower, x0_upper);
}

} // namespace iobs
