#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracle.hpp"

#include "snclt/error.hpp"
#include "snclt/statistics.hpp"

#include <random>

using namespace snclt;

namespace {

DistributionSpec spec(Family f, std::size_t d, double shape = 0.0) {
    DistributionSpec s;
    s.family = f;
    s.d = d;
    s.shape = shape;
    s.covariance.d = d;
    return s;
}

bool near_corner(double x) { return std::abs(std::abs(x) - 0.25) < 1e-4; }

double close_rel(double a, double b, double floor) {
    return std::abs(a - b) / std::max(std::abs(b), floor);
}

// sum over ordered pairs i1 != i2 of Y_{i1 j} (Y_{i2 j}^2 - 1/n), maxed over j.
double brute_u(const Eigen::MatrixXd& y) {
    const auto n = y.rows();
    double best = 0.0;
    for (Eigen::Index j = 0; j < y.cols(); ++j) {
        if (y.col(j).isZero(0.0)) continue;
        double s = 0.0;
        for (Eigen::Index a = 0; a < n; ++a)
            for (Eigen::Index b = 0; b < n; ++b)
                if (a != b) s += y(a, j) * (y(b, j) * y(b, j) - 1.0 / n);
        best = std::max(best, std::abs(s));
    }
    return best;
}

}  // namespace

TEST_CASE("self-normalized examples") {
    Eigen::MatrixXd one(1, 3);
    one << 2.0, -0.5, 0.0;
    const auto s1 = self_normalized(one);
    CHECK(s1.values(0) == 1.0);
    CHECK(s1.values(1) == 1.0);
    CHECK(s1.degenerate_mask[2]);
    CHECK(s1.degenerate_count() == 1);

    Eigen::MatrixXd m(6, 2);
    m.col(0).setConstant(-1.3);
    m.col(1) << 1, -1, 1, -1, 1, -1;
    const auto s = self_normalized(m);
    CHECK(s.values(0) == doctest::Approx(std::sqrt(6.0)).epsilon(1e-15));
    CHECK(s.values(1) == 0.0);
    CHECK(s.argmax == 0);
    CHECK(s.max_value == s.values(0));

    CHECK_THROWS_AS(self_normalized(Eigen::MatrixXd::Zero(4, 3)), DegeneracyError);
}

TEST_CASE("self-normalized properties") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 1 + rng() % 60;
        const std::size_t d = 1 + rng() % 10;
        const auto x = generate_sample(spec(Family::student_t, d, 2.2), std::max<std::size_t>(n, 2), rng());
        const auto s = self_normalized(x);
        const double cap = std::sqrt(static_cast<double>(x.n()));
        CHECK(s.values.maxCoeff() <= cap + 1e-12);

        const auto j = static_cast<Eigen::Index>(rng() % d);
        auto flipped = x.data;
        flipped.col(j) *= -1.0;
        CHECK(self_normalized(flipped).values == s.values);

        auto scaled = x.data;
        const double c = std::exp(std::uniform_real_distribution<>(-5, 5)(rng));
        scaled.col(j) *= c;
        CHECK(std::abs(self_normalized(scaled).values(j) - s.values(j)) <= 1e-12 * std::max(1.0, s.values(j)));
    }
}

TEST_CASE("eta examples") {
    Eigen::MatrixXd y(2, 3);
    y << 0.6, 0.0, 1.0, 0.8, 0.0, 1.0;
    const auto e = eta(y);
    CHECK(e.eta(0) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(e.in_band[0]);
    CHECK(e.eta(1) == -1.0);
    CHECK_FALSE(e.in_band[1]);
    CHECK(e.eta(2) == 1.0);
    CHECK_FALSE(e.in_band[2]);
    CHECK_FALSE(e.all_in_band());
}

TEST_CASE("rademacher truncation: eta vanishes") {
    for (std::size_t n : {4, 16, 64, 256, 1024}) {
        const auto x = generate_sample(spec(Family::rademacher, 5), n, n);
        const auto t = truncate(x, solve_levels(x, n, TruncationMode::per_coordinate));
        const auto e = eta(t);
        CHECK(e.eta.cwiseAbs().maxCoeff() == 0.0);
        CHECK(e.all_in_band());
    }
    for (std::size_t n : {3, 7, 100, 999}) {
        const auto x = generate_sample(spec(Family::rademacher, 5), n, n);
        const auto t = truncate(x, solve_levels(x, n, TruncationMode::per_coordinate));
        CHECK(eta(t).eta.cwiseAbs().maxCoeff() <= 1e-13);
    }
}

TEST_CASE("g point values") {
    CHECK(g_eval(1.0).g == 1.0);
    CHECK(g_eval(0.25).g == 2.0);
    CHECK(g_eval(-0.25).g == 2.0);
    CHECK(g_eval(1.75).g == doctest::Approx(1.0 / std::sqrt(1.75)).epsilon(1e-15));
    const double g0 = g_eval(0.0).g;
    CHECK(g0 == doctest::Approx(1.0 / std::sqrt(SmootherG::clamp_lo)));
    CHECK(g0 >= 0.125);
    CHECK(g0 <= 2.0);
    CHECK(g_eval(10.0).g == doctest::Approx(1.0 / std::sqrt(SmootherG::clamp_hi)));
}

TEST_CASE("g on the band and global bounds") {
    for (int k = 0; k <= 20000; ++k) {
        const double x = -4.0 + 8.0 * k / 20000.0;
        const auto v = g_eval(x);
        CHECK(v.g >= 0.125);
        CHECK(v.g <= 2.0);
        CHECK(std::abs(v.d1) <= 4.0 + 1e-6);
        CHECK(std::abs(v.d2) <= 24.0 + 1e-4);
        CHECK(v.g == g_eval(-x).g);
        const double u = std::abs(x);
        if (u >= 0.25 && u <= 1.75) CHECK(std::abs(v.g - 1.0 / std::sqrt(u)) <= 1e-12);
    }
}

TEST_CASE("g derivatives against central differences") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> unif(-4.0, 4.0);
    int checked = 0;
    while (checked < 1000) {
        const double x = unif(rng);
        if (near_corner(x)) continue;
        const double h = 1e-5;
        const double fd1 = (g_eval(x + h).g - g_eval(x - h).g) / (2 * h);
        // Richardson step for g'': the upper blend has large fourth derivatives.
        const auto cd = [&](double s) { return (g_eval(x + s).d1 - g_eval(x - s).d1) / (2 * s); };
        const double fd2 = (4.0 * cd(5e-5) - cd(1e-4)) / 3.0;
        const auto v = g_eval(x);
        CHECK(close_rel(v.d1, fd1, 1e-2) <= 1e-6);
        CHECK(close_rel(v.d2, fd2, 1e-2) <= 1e-6);
        ++checked;
    }
    // Joins of the upper transition.
    for (double x : {1.75, 1.875, -1.75, -1.875, 1.8, -1.83}) {
        const double h = 1e-6;
        CHECK(close_rel(g_eval(x).d1, (g_eval(x + h).g - g_eval(x - h).g) / (2 * h), 1e-2) <= 1e-6);
    }
}

TEST_CASE("tilted sum") {
    Eigen::MatrixXd y(2, 2);
    y << 0.6, 0.8, 0.8, -0.6;
    const auto t0 = tilted_sum(y);
    CHECK(std::abs(t0.y_tilde_sum(0) - y.col(0).sum()) <= 1e-15);
    CHECK(std::abs(t0.y_tilde_sum(1) - y.col(1).sum()) <= 1e-15);

    Eigen::MatrixXd big = y * 2.0;  // column sums of squares = 4
    const auto tb = tilted_sum(big);
    for (Eigen::Index j = 0; j < 2; ++j) {
        CHECK(std::abs(tb.y_tilde_sum(j)) <= 2.0 * std::abs(big.col(j).sum()));
        CHECK(tb.y_tilde_sum(j) ==
              doctest::Approx(big.col(j).sum() / std::sqrt(SmootherG::clamp_hi)).epsilon(1e-15));
    }
}

TEST_CASE("event equalities on truncated gaussian samples") {
    std::mt19937_64 rng(9);
    std::size_t flag_free = 0, in_band = 0;
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = 50, d = 5;
        const auto x = generate_sample(spec(Family::gaussian, d), n, rng());
        const auto levels = solve_levels(spec(Family::gaussian, d), n, TruncationMode::per_coordinate);
        const auto t = truncate(x, levels);
        const auto ty = self_normalized(t.y);
        if (!t.any_truncated()) {
            ++flag_free;
            CHECK(self_normalized(scale_by_levels(x.data, levels, n)).max_value == ty.max_value);
            CHECK(self_normalized(x).max_value == doctest::Approx(ty.max_value).epsilon(1e-14));
        }
        const auto e = eta(t);
        if (e.all_in_band()) {
            ++in_band;
            // g(s) = s^{-1/2} on the band, so |sum Y| g(sum Y^2) = T_n^Y coordinatewise.
            CHECK(std::abs(tilted_sum(t).max_value - ty.max_value) <= 1e-10);
        }
    }
    CHECK(flag_free > 200);
    CHECK(in_band > 200);
}

TEST_CASE("ustat: linear form equals the double loop") {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 2 + rng() % 49;
        const std::size_t d = 1 + rng() % 8;
        const auto x = generate_sample(spec(Family::student_t, d, 3.0), n, rng());
        const auto t = truncate(x, solve_levels(x, n, TruncationMode::per_coordinate));
        const double fast = ustat_diagnostics(t).u_max;
        const double slow = brute_u(t.y);
        CHECK(std::abs(fast - slow) <= 1e-10 * std::max(slow, 1e-3));
    }
}

TEST_CASE("ustat examples") {
    const auto x = generate_sample(spec(Family::rademacher, 3), 64, 1);
    const auto t = truncate(x, solve_levels(x, 64, TruncationMode::per_coordinate));
    const auto u = ustat_diagnostics(t);
    CHECK(u.u_max == 0.0);
    CHECK(u.s2 == 0.0);

    Eigen::MatrixXd two(2, 1);
    two << 1.0 / std::sqrt(2.0), -1.0 / std::sqrt(2.0);
    CHECK(ustat_diagnostics(two).u_max <= 1e-16);
    CHECK(ustat_diagnostics(two).s1 == 0.0);

    // Centered columns with sum of squares 1: u = |sum Y (Y^2 - 1/n)|.
    Eigen::MatrixXd c(4, 1);
    c << 0.7, -0.1, -0.2, -0.4;
    c.col(0) /= c.norm();
    const double direct = std::abs((c.array() * (c.array().square() - 0.25)).sum());
    CHECK(ustat_diagnostics(c).u_max == doctest::Approx(direct).epsilon(1e-12));
    CHECK(ustat_diagnostics(c).u_max == doctest::Approx(brute_u(c)).epsilon(1e-12));

    CHECK_THROWS_AS(ustat_diagnostics(Eigen::MatrixXd::Ones(1, 2)), ConfigError);
}
