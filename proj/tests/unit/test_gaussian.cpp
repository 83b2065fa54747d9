#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracle.hpp"

#include "snclt/error.hpp"
#include "snclt/gaussian.hpp"
#include "snclt/harness.hpp"

#include <algorithm>
#include <random>

using namespace snclt;

namespace {

DistributionSpec spec(Family f, std::size_t d) {
    DistributionSpec s;
    s.family = f;
    s.d = d;
    s.covariance.d = d;
    return s;
}

double fraction_at_most(const std::vector<double>& v, double t) {
    return static_cast<double>(std::count_if(v.begin(), v.end(), [&](double x) { return x <= t; })) /
           static_cast<double>(v.size());
}

Eigen::MatrixXd equicorrelated(std::size_t d, double rho) {
    return build_covariance({CovarianceKind::equicorrelated, d, rho});
}

}  // namespace

TEST_CASE("make_gaussian_spec factors PSD matrices") {
    const auto s = make_gaussian_spec(equicorrelated(5, 0.4));
    CHECK((s.factor * s.factor.transpose() - s.omega).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK(s.lambda_min == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(s.unit_diagonal);

    const Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(4, 4);
    const auto r = make_gaussian_spec(ones);
    CHECK((r.factor * r.factor.transpose() - ones).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK(r.lambda_min == 0.0);

    Eigen::MatrixXd bad(2, 2);
    bad << 1.0, 2.0, 2.0, 1.0;
    CHECK_THROWS_AS(make_gaussian_spec(bad), DegeneracyError);
    const auto fixed = make_gaussian_spec(bad, true);
    CHECK((fixed.factor * fixed.factor.transpose() - fixed.omega).cwiseAbs().maxCoeff() <= 1e-10);

    Eigen::MatrixXd asym(2, 2);
    asym << 1.0, 0.3, 0.1, 1.0;
    CHECK_THROWS_AS(make_gaussian_spec(asym), ConfigError);
}

TEST_CASE("correlation_from_sample") {
    auto x = generate_sample(spec(Family::gaussian, 3), 1000, 4);
    x.data.col(2) = x.data.col(0);
    const auto c = correlation_from_sample(x);
    CHECK(c.omega(0, 2) == doctest::Approx(1.0).epsilon(1e-12));
    for (Eigen::Index j = 0; j < 3; ++j) CHECK(c.omega(j, j) == 1.0);

    const auto ind = generate_sample(spec(Family::gaussian, 4), 100000, 8);
    const auto ci = correlation_from_sample(ind);
    for (Eigen::Index j = 0; j < 4; ++j)
        for (Eigen::Index k = 0; k < 4; ++k) {
            if (j == k)
                CHECK(ci.omega(j, k) == 1.0);
            else
                CHECK(std::abs(ci.omega(j, k)) <= 0.02);
        }

    Eigen::MatrixXd constant = Eigen::MatrixXd::Ones(10, 2);
    constant(3, 0) = 2.0;
    CHECK_THROWS_AS(correlation_from_sample(constant), DegeneracyError);
}

TEST_CASE("sample_max: d = 1") {
    const auto s = make_gaussian_spec(Eigen::MatrixXd::Identity(1, 1));
    const std::size_t m = 100000;
    const auto draws = sample_max(s, m, 12);
    const double p = fraction_at_most(draws, 1.96);
    CHECK(std::abs(p - 0.95) <= 3.0 * oracle::binomial_se(0.95, m));
    CHECK(std::all_of(draws.begin(), draws.end(), [](double v) { return v >= 0.0; }));
}

TEST_CASE("sample_max: identity matches the exact CDF") {
    const std::size_t d = 10, m = 100000;
    const auto s = make_gaussian_spec(Eigen::MatrixXd::Identity(d, d));
    const auto draws = sample_max(s, m, 44);
    for (double t : {1.5, 2.0, 2.5, 3.0, 3.5}) {
        const double exact = max_cdf_diag(t, d);
        CHECK(std::abs(fraction_at_most(draws, t) - exact) <= 3.0 * oracle::binomial_se(exact, m));
    }
    // Two-sample KS against inversion draws of the exact law.
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> unif;
    std::vector<double> inv(m);
    for (auto& v : inv) v = normal_quantile(0.5 * (1.0 + std::pow(unif(rng), 1.0 / d)));
    const double crit = 1.63 * std::sqrt(2.0 / m);
    CHECK(ks_two_sample(draws, inv).distance <= crit);
}

TEST_CASE("sample_max: determinism and worker invariance") {
    const auto s = make_gaussian_spec(equicorrelated(6, 0.3));
    const auto a = sample_max(s, 5000, 9, 1);
    CHECK(a == sample_max(s, 5000, 9, 1));
    CHECK(a == sample_max(s, 5000, 9, 4));
    CHECK(a == sample_max(s, 5000, 9, 7));
    CHECK(a != sample_max(s, 5000, 10, 1));
}

TEST_CASE("max_cdf_diag examples") {
    CHECK(max_cdf_diag(INFINITY, 7) == 1.0);
    CHECK(max_cdf_diag(50.0, 1000000) == 1.0);
    CHECK(max_cdf_diag(0.0, 3) == 0.0);
    CHECK(std::abs(max_cdf_diag(1.96, 2) - 0.9025) <= 1e-4);
    const double t = 1.3;
    CHECK(max_cdf_diag(t, 3) == doctest::Approx(std::pow(2 * oracle::Phi(t) - 1, 3)).epsilon(1e-14));
}

TEST_CASE("smoothed indicator examples") {
    Eigen::VectorXd zero = Eigen::VectorXd::Zero(1);
    for (double eps : {0.1, 1.0}) {
        for (double t : {0.2, 1.0, 3.0})
            CHECK(smoothed_indicator(zero, eps, t) ==
                  doctest::Approx(2.0 * oracle::Phi(t / eps) - 1.0).epsilon(1e-14));
    }
    Eigen::VectorXd x(3);
    x << 1.0, -0.4, 0.0;
    CHECK(std::abs(smoothed_indicator(x, 1e-6, 2.0) - 1.0) <= 1e-10);
    CHECK(smoothed_indicator(x, 0.3, 0.0) == 0.0);
    CHECK_THROWS_AS(smoothed_indicator(x, 0.0, 1.0), ConfigError);
}

TEST_CASE("smoothed indicator: Monte Carlo and monotonicity in t") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unif(-1.5, 1.5);
    for (int cfg = 0; cfg < 10; ++cfg) {
        Eigen::VectorXd x(4);
        for (auto& v : x) v = unif(rng);
        const double eps = 0.3, t = 2.0;
        const std::size_t m = 100000;
        std::size_t inside = 0;
        for (std::size_t k = 0; k < m; ++k) {
            double worst = 0.0;
            for (Eigen::Index j = 0; j < 4; ++j) worst = std::max(worst, std::abs(x(j) + eps * normal(rng)));
            inside += worst <= t;
        }
        const double h = smoothed_indicator(x, eps, t);
        CHECK(std::abs(static_cast<double>(inside) / m - h) <= 3.0 * oracle::binomial_se(h, m) + 1e-12);
        for (double s = 0.05; s < 4.0; s += 0.05) {
            const double step = 1e-4;
            CHECK(smoothed_indicator(x, eps, s + step) - smoothed_indicator(x, eps, s - step) >= 0.0);
        }
    }
}

TEST_CASE("discrepancy") {
    const auto a = equicorrelated(2, 0.0);
    CHECK(discrepancy(a, a) == 0.0);
    CHECK(discrepancy(a, equicorrelated(2, 0.3)) == doctest::Approx(0.3).epsilon(1e-15));
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    for (int trial = 0; trial < 30; ++trial) {
        const Eigen::Index d = 1 + static_cast<Eigen::Index>(rng() % 9);
        Eigen::MatrixXd p(d, d), q(d, d), r(d, d);
        for (auto* m : {&p, &q, &r})
            for (Eigen::Index i = 0; i < d * d; ++i) m->data()[i] = unif(rng);
        double brute = 0.0;
        for (Eigen::Index j = 0; j < d; ++j)
            for (Eigen::Index k = 0; k < d; ++k) brute = std::max(brute, std::abs(p(j, k) - q(j, k)));
        CHECK(discrepancy(p, q) == brute);
        CHECK(discrepancy(p, q) == discrepancy(q, p));
        CHECK(discrepancy(p, r) <= discrepancy(p, q) + discrepancy(q, r) + 1e-12);
    }
    CHECK_THROWS_AS(discrepancy(Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Zero(3, 3)), ConfigError);
}

TEST_CASE("nazarov band bound") {
    CHECK(nazarov_band_bound(0.0, 10, 1.0) == 0.0);
    CHECK(nazarov_band_bound(0.1, 1, 1.0) == doctest::Approx(0.2).epsilon(1e-15));
    const double mass = 2.0 * (oracle::Phi(0.1) - 0.5);
    CHECK(mass == doctest::Approx(0.0797).epsilon(1e-3));
    CHECK(mass <= nazarov_band_bound(0.1, 1, 1.0));

    const std::size_t d = 32, m = 100000;
    const auto draws = sample_max(make_gaussian_spec(Eigen::MatrixXd::Identity(d, d)), m, 5);
    const double eps = 0.05;
    for (int k = 0; k < 20; ++k) {
        const double t = 1.5 + 0.12 * k;
        const double pm = fraction_at_most(draws, t + eps) - fraction_at_most(draws, t);
        CHECK(pm <= nazarov_band_bound(eps, d, 1.0));
    }
}

TEST_CASE("sidak threshold") {
    CHECK(std::abs(sidak_threshold(0.05, 1) - 1.95996) <= 1e-4);
    CHECK(std::abs(max_cdf_diag(sidak_threshold(0.05, 2), 2) - 0.95) <= 1e-6);
    for (std::size_t d : {1, 5, 1000, 1000000}) {
        double prev = 0.0;
        for (double alpha : {0.5, 0.1, 0.01, 1e-4, 1e-8, 1e-12}) {
            const double t = sidak_threshold(alpha, d);
            CHECK(t > prev);
            prev = t;
        }
        CHECK(std::abs(max_cdf_diag(sidak_threshold(1e-3, d), d) - (1 - 1e-3)) <= 1e-9);
    }
    for (double rho : {0.0, 0.5}) {
        const std::size_t d = 20, m = 100000;
        const double alpha = 0.05;
        const auto draws = sample_max(make_gaussian_spec(equicorrelated(d, rho)), m, 31);
        const double exceed = 1.0 - fraction_at_most(draws, sidak_threshold(alpha, d));
        CHECK(exceed <= alpha + 3.0 * oracle::binomial_se(alpha, m));
    }
}

TEST_CASE("estimate_max_cdf") {
    const auto e = estimate_max_cdf({3.0, 1.0, 2.0, 2.0}, {2.5, 0.0, 2.0});
    CHECK(e.grid == std::vector<double>{0.0, 2.0, 2.5});
    CHECK(e.cdf == std::vector<double>{0.0, 0.75, 0.75});
    CHECK(e.se[1] == doctest::Approx(std::sqrt(0.75 * 0.25 / 4)));
}
