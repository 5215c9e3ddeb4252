#include <catch2/catch_amalgamated.hpp>

#include "iobs/jordan.hpp"
#include "iobs/signal.hpp"

#include <cmath>
#include <vector>

using namespace iobs;

namespace {

constexpr double kPi = 3.14159265358979323846;

Matrix random_basis(Index n, Rng& rng, double rcond_floor = 1e-2) {
    Matrix v(n, n);
    do {
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < n; ++j) v(i, j) = rng.uniform(-1.0, 1.0);
    } while (rcond(v) < rcond_floor);
    return v;
}

struct SpectrumPlan {
    std::vector<double> reals;
    std::vector<std::pair<double, double>> pairs; // (alpha, beta), beta > 0
    Index size() const { return static_cast<Index>(reals.size() + 2 * pairs.size()); }
};

// Keep all distinct eigenvalues at least 0.05 apart so the draws stay far
// from the defective boundary.
bool well_separated(const SpectrumPlan& plan, double re, double im) {
    for (double r : plan.reals)
        if (std::hypot(re - r, im) < 0.05) return false;
    for (const auto& [a, b] : plan.pairs)
        if (std::hypot(re - a, im - b) < 0.05) return false;
    return true;
}

SpectrumPlan random_plan(Index n, TimeDomain domain, Rng& rng) {
    SpectrumPlan plan;
    Index left = n;
    while (left > 0) {
        const bool make_pair = left >= 2 && rng.uniform01() < 0.5;
        if (make_pair) {
            double a, b;
            do {
                if (domain == TimeDomain::Discrete) {
                    const double r = rng.uniform(0.15, 0.9);
                    const double th = rng.uniform(0.1, kPi - 0.1);
                    a = r * std::cos(th);
                    b = r * std::sin(th);
                } else {
                    a = rng.uniform(-3.0, -0.1);
                    b = rng.uniform(0.1, 3.0);
                }
            } while (!well_separated(plan, a, b));
            plan.pairs.emplace_back(a, b);
            left -= 2;
        } else {
            double r;
            do {
                r = domain == TimeDomain::Discrete ? rng.uniform(-0.9, 0.9)
                                                   : rng.uniform(-3.0, -0.1);
            } while (std::abs(r) < 0.05 || !well_separated(plan, r, 0.0));
            plan.reals.push_back(r);
            left -= 1;
        }
    }
    return plan;
}

Matrix realize(const SpectrumPlan& plan, Rng& rng) {
    const Index n = plan.size();
    Matrix j = Matrix::Zero(n, n);
    Index at = 0;
    for (double r : plan.reals) j(at, at) = r, ++at;
    for (const auto& [a, b] : plan.pairs) {
        j(at, at) = a;
        j(at, at + 1) = b;
        j(at + 1, at) = -b;
        j(at + 1, at + 1) = a;
        at += 2;
    }
    const Matrix v = random_basis(n, rng);
    return v * j * invert(v);
}

double dt_identity_residual(const JordanTransform& jt, const Matrix& f, double t) {
    const auto [p_t, p_t_inv] = transform_at(jt, t);
    const Matrix p_next = transform_at(jt, t + 1.0).first;
    return (p_next * f * p_t_inv - jt.Lambda).cwiseAbs().maxCoeff();
}

double ct_identity_residual(const JordanTransform& jt, const Matrix& f, double t) {
    const Matrix p_t = transform_at(jt, t).first;
    const Matrix dp = transform_derivative_at(jt, t);
    return (jt.Lambda * p_t - dp - p_t * f).cwiseAbs().maxCoeff();
}

double spectral_norm(const Matrix& m) {
    return Eigen::JacobiSVD<Matrix>(m).singularValues()(0);
}

std::vector<double> diagonal_of(const Matrix& m) {
    std::vector<double> out;
    for (Index i = 0; i < m.rows(); ++i) out.push_back(m(i, i));
    return out;
}

} // namespace

TEST_CASE("negative real mode flips sign each step") {
    Matrix f(1, 1);
    f << -0.5;
    const JordanTransform jt = build_transform(f, TimeDomain::Discrete);
    REQUIRE_FALSE(jt.identity);
    REQUIRE(jt.Lambda(0, 0) == 0.5);
    REQUIRE(jt.blocks.size() == 1);
    REQUIRE(jt.blocks[0].size == 1);
    for (int t = 0; t <= 100; ++t) {
        const auto [p, p_inv] = transform_at(jt, t);
        const double want = t % 2 == 0 ? 1.0 : -1.0;
        REQUIRE(p(0, 0) == want);
        REQUIRE(p_inv(0, 0) == want);
        REQUIRE(dt_identity_residual(jt, f, t) <= 1e-15);
    }
}

TEST_CASE("cooperative matrices need no transform") {
    Matrix dt(2, 2);
    dt << 0.4, 0.1, 0.2, 0.3;
    const JordanTransform a = build_transform(dt, TimeDomain::Discrete);
    REQUIRE(a.identity);
    REQUIRE((a.Lambda - dt).cwiseAbs().maxCoeff() == 0.0);
    const auto [p, p_inv] = transform_at(a, 17.0);
    REQUIRE((p - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE((p_inv - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE(a.sigma == 2.0);

    Matrix ct(2, 2);
    ct << -1.0, 0.5, 0.0, -2.0;
    const JordanTransform b = build_transform(ct, TimeDomain::Continuous);
    REQUIRE(b.identity);
    REQUIRE(transform_derivative_at(b, 3.0).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("planar rotation-scaling mode") {
    const double r = 0.5, th = kPi / 4.0;
    Matrix f(2, 2);
    f << r * std::cos(th), -r * std::sin(th), r * std::sin(th), r * std::cos(th);
    const JordanTransform jt = build_transform(f, TimeDomain::Discrete);
    REQUIRE_FALSE(jt.identity);
    REQUIRE(jt.blocks.size() == 1);
    REQUIRE(jt.blocks[0].size == 2);
    REQUIRE(jt.blocks[0].r == Catch::Approx(r).margin(1e-12));
    REQUIRE(jt.blocks[0].theta == Catch::Approx(th).margin(1e-12));
    REQUIRE((jt.Lambda - r * Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() <= 1e-12);
    for (int t = 0; t <= 50; ++t) {
        REQUIRE(dt_identity_residual(jt, f, t) <= 1e-12);
        const Matrix q = transform_orthogonal_factor(jt, t);
        REQUIRE((q.transpose() * q - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() <= 1e-12);
        const auto [p, p_inv] = transform_at(jt, t);
        REQUIRE((p * p_inv - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("continuous oscillatory mode") {
    Matrix f(2, 2);
    f << -1.0, 2.0, -2.0, -1.0;
    const JordanTransform jt = build_transform(f, TimeDomain::Continuous);
    REQUIRE((jt.Lambda + Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() <= 1e-12);
    for (double t : {0.0, 0.13, 0.9, 1.7, 5.0}) {
        REQUIRE(ct_identity_residual(jt, f, t) <= 1e-9);
        // Central difference cross-check of the derivative.
        const double h = 1e-6;
        const Matrix fd =
            (transform_at(jt, t + h).first - transform_at(jt, t - h).first) / (2.0 * h);
        REQUIRE((fd - transform_derivative_at(jt, t)).cwiseAbs().maxCoeff() <= 1e-5);
    }
}

TEST_CASE("unstable hidden blocks are refused") {
    Matrix dt(1, 1);
    dt << 1.1;
    REQUIRE_THROWS_AS(build_transform(dt, TimeDomain::Discrete), NotStable);
    Matrix ct(1, 1);
    ct << 0.1;
    REQUIRE_THROWS_AS(build_transform(ct, TimeDomain::Continuous), NotStable);
}

TEST_CASE("defective and ill-conditioned bases are refused") {
    // Negative diagonals keep these off the cooperative fast path, which would
    // otherwise absorb any nonnegative matrix without eigendecomposing it.
    Matrix jordan_cell(2, 2);
    jordan_cell << -0.5, 1.0, 0.0, -0.5;
    REQUIRE_THROWS_AS(build_transform(jordan_cell, TimeDomain::Discrete), NearDefective);

    Matrix skewed(2, 2);
    skewed << 0.1, -1e7, 0.0, 0.2; // eigenvector basis condition ~ 1e8
    REQUIRE_THROWS_AS(build_transform(skewed, TimeDomain::Discrete), NearDefective);
}

TEST_CASE("empty hidden block yields an empty transform") {
    const JordanTransform jt = build_transform(Matrix(0, 0), TimeDomain::Discrete);
    REQUIRE(jt.n == 0);
    REQUIRE(jt.identity);
    REQUIRE(transform_at(jt, 5.0).first.rows() == 0);
}

TEST_CASE("random discrete modes satisfy the step identity") {
    Rng rng(101);
    const std::vector<double> times = {0, 1, 2, 3, 5, 10, 23, 50};
    for (int rep = 0; rep < 200; ++rep) {
        const Index n = 1 + static_cast<Index>(rng.uniform01() * 6);
        const SpectrumPlan plan = random_plan(n, TimeDomain::Discrete, rng);
        const Matrix f = realize(plan, rng);
        JordanTransform jt;
        try {
            jt = build_transform(f, TimeDomain::Discrete);
        } catch (const NearDefective&) {
            continue; // the random conjugation can still land near-defective
        }
        const double scale = 1.0 + f.cwiseAbs().maxCoeff();
        for (double t : times) {
            REQUIRE(dt_identity_residual(jt, f, t) <= 1e-9 * scale);
            const auto [p, p_inv] = transform_at(jt, t);
            REQUIRE(spectral_norm(p) <= jt.sigma + 1e-9);
            REQUIRE(spectral_norm(p_inv) <= jt.sigma + 1e-9);
            REQUIRE((p * p_inv - Matrix::Identity(jt.n, jt.n)).cwiseAbs().maxCoeff() <=
                    1e-8);
        }
        if (!jt.identity) {
            // Lambda carries the mode magnitudes on its diagonal.
            std::vector<double> got = diagonal_of(jt.Lambda);
            std::vector<double> want;
            for (double r : plan.reals) want.push_back(std::abs(r));
            for (const auto& [a, b] : plan.pairs) {
                want.push_back(std::hypot(a, b));
                want.push_back(std::hypot(a, b));
            }
            std::sort(got.begin(), got.end());
            std::sort(want.begin(), want.end());
            for (std::size_t i = 0; i < want.size(); ++i)
                REQUIRE(got[i] == Catch::Approx(want[i]).margin(1e-8));
        }
    }
}

TEST_CASE("random continuous modes satisfy the differential identity") {
    Rng rng(103);
    const std::vector<double> times = {0.0, 0.37, 1.1, 2.6, 4.9};
    for (int rep = 0; rep < 200; ++rep) {
        const Index n = 1 + static_cast<Index>(rng.uniform01() * 6);
        const SpectrumPlan plan = random_plan(n, TimeDomain::Continuous, rng);
        const Matrix f = realize(plan, rng);
        JordanTransform jt;
        try {
            jt = build_transform(f, TimeDomain::Continuous);
        } catch (const NearDefective&) {
            continue;
        }
        const double scale = 1.0 + f.cwiseAbs().maxCoeff();
        for (double t : times) {
            REQUIRE(ct_identity_residual(jt, f, t) <= 1e-9 * scale);
            const auto [p, p_inv] = transform_at(jt, t);
            REQUIRE(spectral_norm(p) <= jt.sigma + 1e-9);
            REQUIRE(spectral_norm(p_inv) <= jt.sigma + 1e-9);
        }
        if (!jt.identity) {
            // Lambda carries the mode decay rates on its diagonal.
            std::vector<double> got = diagonal_of(jt.Lambda);
            std::vector<double> want;
            for (double r : plan.reals) want.push_back(r);
            for (const auto& [a, b] : plan.pairs) {
                want.push_back(a);
                want.push_back(a);
            }
            std::sort(got.begin(), got.end());
            std::sort(want.begin(), want.end());
            for (std::size_t i = 0; i < want.size(); ++i)
                REQUIRE(got[i] == Catch::Approx(want[i]).margin(1e-8));
        }
    }
}
