#pragma once

#include "iobs/decomposition.hpp"
#include "iobs/design.hpp"
#include "iobs/jordan.hpp"
#include "iobs/linalg.hpp"

#include <utility>

namespace iobs {

// Envelope values at one time instant.
struct Envelopes {
    Vector d_upper, d_lower;
    Vector w_upper, w_lower;
};

// Hat states of the cascade observer. zo_* live in z_o coordinates (ordered
// only after multiplication by T); zno_* live in the P_t coordinates and are
// ordered directly.
struct ObserverState {
    double t = 0.0;
    Vector zo_upper, zo_lower;
    Vector zno_upper, zno_lower;
};

// In DT the returned pair is the next state, in CT the derivative; the
// right-hand side is the same expression in both domains.
inline std::pair<Vector, Vector> zo_rhs(const SylvesterDesign& d,
                                        const ObservabilityDecomposition& dec,
                                        const Vector& zo_upper, const Vector& zo_lower,
                                        const Vector& y, const Vector& u, const Envelopes& env) {
    const Vector shared = dec.N_o * u;
    Vector up = d.gain * (y - dec.H_o * zo_upper) + dec.F_o * zo_upper + shared +
                d.dist_plus * env.d_upper - d.dist_minus * env.d_lower +
                d.noise_plus * env.w_upper - d.noise_minus * env.w_lower;
    Vector lo = d.gain * (y - dec.H_o * zo_lower) + dec.F_o * zo_lower + shared +
                d.dist_plus * env.d_lower - d.dist_minus * env.d_upper +
                d.noise_plus * env.w_lower - d.noise_minus * env.w_upper;
    return {std::move(up), std::move(lo)};
}

// Running z_o enclosure (valid after time 0): route the hat states through
// (T^-1)^+/- T.
inline Box zo_bounds(const SylvesterDesign& d, const Vector& zo_upper, const Vector& zo_lower) {
    Vector up = d.bound_plus * zo_upper - d.bound_minus * zo_lower;
    Vector lo = d.bound_plus * zo_lower - d.bound_minus * zo_upper;
    return {std::move(up), std::move(lo)};
}

// Initial z_no hat states: split of P_0 N_no over the initial box.
inline Box zno_initial_state(const JordanTransform& jt, const ObservabilityDecomposition& dec,
                             const Vector& x0_upper, const Vector& x0_lower) {
    if (jt.n == 0) return {Vector(0), Vector(0)};
    const Matrix p0 = transform_at(jt, 0.0).first;
    return interval_image(p0 * dec.N_no, x0_lower, x0_upper);
}

// Reported z_no bounds at time 0: direct split of N_no over the initial box.
inline Box zno_initial_bounds(const ObservabilityDecomposition& dec, const Vector& x0_upper,
                              const Vector& x0_lower) {
    if (dec.n_no == 0) return {Vector(0), Vector(0)};
    return interval_image(dec.N_no, x0_lower, x0_upper);
}

// z_no update driven by the certified z_o box. The coupling and disturbance
// maps are evaluated at Sigma_t = P_{t+1} (DT) / P_t (CT).
inline std::pair<Vector, Vector> zno_rhs(const JordanTransform& jt,
                                         const ObservabilityDecomposition& dec,
                                         const Vector& zno_upper, const Vector& zno_lower,
                                         double t, const Box& zo_box, const Vector& u,
                                         const Envelopes& env) {
    if (jt.n == 0) return {Vector(0), Vector(0)};
    const double sigma_time = jt.domain == TimeDomain::Discrete ? t + 1.0 : t;
    const Matrix sigma = transform_at(jt, sigma_time).first;
    const Matrix sf = sigma * dec.F_noo;
    const Matrix sd = sigma * dec.D_no;
    auto [sf_p, sf_m] = pos_neg_split(sf);
    auto [sd_p, sd_m] = pos_neg_split(sd);
    const Vector shared = sigma * (dec.N_no * u);
    Vector up = jt.Lambda * zno_upper + shared + sf_p * zo_box.upper - sf_m * zo_box.lower +
                sd_p * env.d_upper - sd_m * env.d_lower;
    Vector lo = jt.Lambda * zno_lower + shared + sf_p * zo_box.lower - sf_m * zo_box.upper +
                sd_p * env.d_lower - sd_m * env.d_upper;
    return {std::move(up), std::move(lo)};
}

// Running z_no enclosure (valid after time 0): split of P_t^-1 over the
// hat box. Raw split rather than interval_image: rounding may push a
// fully-converged hat width a few ulps below zero.
inline Box zno_bounds(const JordanTransform& jt, const Vector& zno_upper,
                      const Vector& zno_lower, double t) {
    if (jt.n == 0) return {Vector(0), Vector(0)};
    const Matrix p_inv = transform_at(jt, t).second;
    auto [pp, pm] = pos_neg_split(p_inv);
    Vector up = pp * zno_upper - pm * zno_lower;
    Vector lo = pp * zno_lower - pm * zno_upper;
    return {std::move(up), std::move(lo)};
}

// x enclosure from the two certified z boxes through M = [M_o M_no].
inline Box recombine(const ObservabilityDecomposition& dec, const Box& zo_box,
                     const Box& zno_box) {
    auto [mo_p, mo_m] = pos_neg_split(dec.M_o);
    Vector up = mo_p * zo_box.upper - mo_m * zo_box.lower;
    Vector lo = mo_p * zo_box.lower - mo_m * zo_box.upper;
    if (dec.n_no > 0) {
        auto [mn_p, mn_m] = pos_neg_split(dec.M_no);
        up += mn_p * zno_box.upper - mn_m * zno_box.lower;
        lo += mn_p * zno_box.lower - mn_m * zno_box.upper;
    }
    return {std::move(up), std::move(lo)};
}

// =====================================================================
// Direct (single-system) form
// =====================================================================

// The cascade flattened into one 2 n_x-state recursion over the stacked hat
// vector (z_o part, z_no part), with identical algebra step by step.
struct DirectObserver {
    ObservabilityDecomposition dec;
    SylvesterDesign design;
    JordanTransform jt;
    Matrix K;             // F_o - gain H_o, constant top-left block
    Matrix phi_l, phi_r;  // constant x-bound maps for the z_o part
};

inline DirectObserver assemble_direct(const ObservabilityDecomposition& dec,
                                      const SylvesterDesign& design,
                                      const JordanTransform& jt) {
    DirectObserver d{dec, design, jt, {}, {}, {}};
    d.K = dec.F_o - design.gain * dec.H_o;
    auto [mo_p, mo_m] = pos_neg_split(dec.M_o);
    d.phi_l = mo_p * design.bound_plus + mo_m * design.bound_minus;
    d.phi_r = mo_p * design.bound_minus + mo_m * design.bound_plus;
    return d;
}

inline Box direct_init(const DirectObserver& d, const Vector& x0_upper, const Vector& x0_lower) {
    const Box zo = zo_initial_state(d.design, x0_upper, x0_lower);
    const Box zno = zno_initial_state(d.jt, d.dec, x0_upper, x0_lower);
    Vector up(d.dec.n_o + d.dec.n_no), lo(d.dec.n_o + d.dec.n_no);
    up << zo.upper, zno.upper;
    lo << zo.lower, zno.lower;
    return {std::move(up), std::move(lo)};
}

inline std::pair<Vector, Vector> direct_rhs(const DirectObserver& d, const Vector& up,
                                            const Vector& lo, double t, const Vector& y,
                                            const Vector& u, const Envelopes& env) {
    const Index n_o = d.dec.n_o;
    const Index n_no = d.dec.n_no;
    const Vector up_o = up.head(n_o), lo_o = lo.head(n_o);
    const Vector up_no = up.tail(n_no), lo_no = lo.tail(n_no);

    const Vector shared_o = d.design.gain * y + d.dec.N_o * u;
    Vector next_up(n_o + n_no), next_lo(n_o + n_no);
    next_up.head(n_o) = d.K * up_o + shared_o + d.design.dist_plus * env.d_upper -
                        d.design.dist_minus * env.d_lower + d.design.noise_plus * env.w_upper -
                        d.design.noise_minus * env.w_lower;
    next_lo.head(n_o) = d.K * lo_o + shared_o + d.design.dist_plus * env.d_lower -
                        d.design.dist_minus * env.d_upper + d.design.noise_plus * env.w_lower -
                        d.design.noise_minus * env.w_upper;
    if (n_no > 0) {
        const double sigma_time = d.jt.domain == TimeDomain::Discrete ? t + 1.0 : t;
        const Matrix sigma = transform_at(d.jt, sigma_time).first;
        const Matrix sf = sigma * d.dec.F_noo;
        auto [sf_p, sf_m] = pos_neg_split(sf);
        const Matrix phi = sf_p * d.design.bound_plus + sf_m * d.design.bound_minus;
        const Matrix omega = -(sf_p * d.design.bound_minus + sf_m * d.design.bound_plus);
        const Matrix sd = sigma * d.dec.D_no;
        auto [sd_p, sd_m] = pos_neg_split(sd);
        const Vector shared_no = sigma * (d.dec.N_no * u);
        next_up.tail(n_no) = phi * up_o + omega * lo_o + d.jt.Lambda * up_no + shared_no +
                             sd_p * env.d_upper - sd_m * env.d_lower;
        next_lo.tail(n_no) = phi * lo_o + omega * up_o + d.jt.Lambda * lo_no + shared_no +
                             sd_p * env.d_lower - sd_m * env.d_upper;
    }
    return {std::move(next_up), std::move(next_lo)};
}

// Running x enclosure from the stacked hat states (valid after time 0).
inline Box direct_bounds(const DirectObserver& d, const Vector& up, const Vector& lo, double t) {
    const Index n_o = d.dec.n_o;
    const Index n_no = d.dec.n_no;
    Vector x_up = d.phi_l * up.head(n_o) - d.phi_r * lo.head(n_o);
    Vector x_lo = d.phi_l * lo.head(n_o) - d.phi_r * up.head(n_o);
    if (n_no > 0) {
        const Matrix p_inv = transform_at(d.jt, t).second;
        auto [pi_p, pi_m] = pos_neg_split(p_inv);
        auto [mn_p, mn_m] = pos_neg_split(d.dec.M_no);
        const Matrix phi_lt = mn_p * pi_p + mn_m * pi_m;
        const Matrix phi_rt = mn_p * pi_m + mn_m * pi_p;
        x_up += phi_lt * up.tail(n_no) - phi_rt * lo.tail(n_no);
        x_lo += phi_lt * lo.tail(n_no) - phi_rt * up.tail(n_no);
    }
    return {std::move(x_up), std::move(x_lo)};
}

} // namespace iobs
