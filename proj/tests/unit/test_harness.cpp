#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracle.hpp"

#include "snclt/error.hpp"
#include "snclt/harness.hpp"

#include <algorithm>
#include <filesystem>
#include <random>

using namespace snclt;

namespace {

ExperimentConfig small_config(Family f = Family::gaussian, std::size_t d = 2) {
    ExperimentConfig c;
    c.dist.family = f;
    c.dist.d = d;
    c.dist.covariance.d = d;
    c.dist.shape = f == Family::student_t ? 5.0 : 0.0;
    c.n_grid = {20, 40, 80};
    c.M = 400;
    c.M_ref = 2000;
    c.master_seed = 42;
    c.pilot_size = 5000;
    return c;
}

std::filesystem::path temp_path(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("snclt_harness_" + name);
}

double brute_one_sample(std::vector<double> s, double (*cdf)(double, std::size_t), std::size_t d) {
    std::sort(s.begin(), s.end());
    const double m = static_cast<double>(s.size());
    double best = 0.0;
    for (double t : s) {
        const double below = static_cast<double>(std::lower_bound(s.begin(), s.end(), t) - s.begin()) / m;
        const double upto = static_cast<double>(std::upper_bound(s.begin(), s.end(), t) - s.begin()) / m;
        best = std::max({best, std::abs(cdf(t, d) - below), std::abs(upto - cdf(t, d))});
    }
    return best;
}

double brute_two_sample(const std::vector<double>& a, const std::vector<double>& b) {
    const auto ecdf = [](const std::vector<double>& v, double t) {
        return static_cast<double>(std::count_if(v.begin(), v.end(), [&](double x) { return x <= t; })) /
               static_cast<double>(v.size());
    };
    double best = 0.0;
    for (const auto* v : {&a, &b})
        for (double t : *v) best = std::max(best, std::abs(ecdf(a, t) - ecdf(b, t)));
    return best;
}

std::vector<ReportRow> rows_of(const std::vector<KSResult>& results) {
    std::vector<ReportRow> out;
    for (const auto& r : results) out.push_back(report_row(r));
    return out;
}

}  // namespace

TEST_CASE("config JSON round trip and validation") {
    auto c = small_config(Family::student_t, 3);
    c.reference = Reference::z_prime;
    c.truncation_mode = TruncationMode::global;
    c.dist.covariance = {CovarianceKind::ar1, 3, 0.4};
    const nlohmann::json j = c;
    for (const char* key : {"dist", "n_grid", "M", "M_ref", "reference", "truncation_mode",
                            "master_seed", "grid_size", "workers"})
        CHECK(j.contains(key));
    const auto back = j.get<ExperimentConfig>();
    CHECK(nlohmann::json(back) == j);

    const auto invalid = [&](auto mutate) {
        auto bad = small_config();
        mutate(bad);
        CHECK_THROWS_AS(bad.validate(), ConfigError);
    };
    invalid([](ExperimentConfig& b) { b.M = 99; });
    invalid([](ExperimentConfig& b) { b.M_ref = b.M - 1; });
    invalid([](ExperimentConfig& b) { b.grid_size = 63; });
    invalid([](ExperimentConfig& b) { b.n_grid = {10, 10, 20}; });
    invalid([](ExperimentConfig& b) { b.n_grid = {30, 20}; });
    invalid([](ExperimentConfig& b) { b.n_grid = {}; });
    invalid([](ExperimentConfig& b) {
        b.dist.covariance = {CovarianceKind::equicorrelated, 2, 0.5};
        b.reference = Reference::exact_diag;
    });
    CHECK_NOTHROW(small_config().validate());

    auto extra = j;
    extra["bogus"] = 1;
    CHECK_THROWS_AS(extra.get<ExperimentConfig>(), ConfigError);
}

TEST_CASE("load_config errors") {
    const auto p = temp_path("cfg.json");
    oracle::write_text(p, "{not json");
    CHECK_THROWS_AS(load_config(p), ConfigError);
    oracle::write_text(p, R"({"dist": {"family": "gaussian", "d": 2}, "n_grid": [10], "M": 50})");
    CHECK_THROWS_AS(load_config(p), ConfigError);
    oracle::write_text(p, R"({"dist": {"family": "gaussian", "d": 2}, "n_grid": [10, 20]})");
    const auto c = load_config(p);
    CHECK(c.dist.covariance.d == 2);
    CHECK(c.M == 1000);
    CHECK_THROWS_AS(load_config(temp_path("missing.json")), IoError);
}

TEST_CASE("KS distances against brute force") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> normal;
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t ma = 1 + rng() % 60, mb = 1 + rng() % 60;
        std::vector<double> a(ma), b(mb);
        for (auto& v : a) v = std::abs(normal(rng));
        for (auto& v : b) v = std::abs(normal(rng)) * 1.1;
        // Ties, within and across samples.
        if (ma > 3) a[1] = a[0], a[2] = b[0];
        const double one = ks_one_sample(a, &max_cdf_diag, 3).distance;
        CHECK(one == doctest::Approx(brute_one_sample(a, &max_cdf_diag, 3)).epsilon(1e-15));
        const auto two = ks_two_sample(a, b);
        CHECK(two.distance == doctest::Approx(brute_two_sample(a, b)).epsilon(1e-15));
        CHECK(two.distance == ks_two_sample(b, a).distance);
    }
    CHECK(ks_two_sample({1.0, 2.0}, {1.0, 2.0}).distance == 0.0);
    CHECK(ks_two_sample({1.0}, {2.0}).distance == 1.0);
    CHECK_THROWS_AS(ks_two_sample({}, {1.0}), ConfigError);
}

TEST_CASE("self-test: Gaussian draws against the same law") {
    const std::size_t m = 10000;
    const auto spec = make_gaussian_spec(Eigen::MatrixXd::Identity(4, 4));
    const double crit = 1.63 * std::sqrt(2.0 / m);
    int below = 0;
    for (std::uint64_t rep = 0; rep < 100; ++rep) {
        const auto a = sample_max(spec, m, derive_seed(7, {rep, 0}));
        const auto b = sample_max(spec, m, derive_seed(7, {rep, 1}));
        below += ks_two_sample(a, b).distance <= crit;
    }
    CHECK(below >= 95);

    const std::size_t mr = 10000, mm = 1000;
    const auto z = sample_max(spec, mr, 99);
    const auto t = sample_max(spec, mm, 100);
    CHECK(ks_two_sample(t, z).distance <= 1.63 * std::sqrt((mm + mr) / static_cast<double>(mm * mr)));
    CHECK(ks_one_sample(z, &max_cdf_diag, 4).distance <= 1.63 / std::sqrt(static_cast<double>(mr)));
}

TEST_CASE("fit_rate on synthetic inputs") {
    std::vector<std::pair<std::size_t, double>> exact;
    for (std::size_t n : {100, 400, 1600, 6400}) exact.emplace_back(n, std::pow(n, -0.125));
    const auto f = fit_rate(exact);
    CHECK(std::abs(f.slope + 0.125) <= 1e-12);
    CHECK(std::abs(f.intercept) <= 1e-12);
    CHECK(f.slope_se <= 1e-12);

    std::vector<std::pair<std::size_t, double>> half;
    for (std::size_t n : {10, 100, 1000}) half.emplace_back(n, 3.0 / std::sqrt(static_cast<double>(n)));
    CHECK(fit_rate(half).slope == doctest::Approx(-0.5).epsilon(1e-12));

    std::mt19937_64 rng(13);
    std::normal_distribution<double> noise(0.0, 0.05);
    int covered = 0;
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<std::pair<std::size_t, double>> cells;
        for (std::size_t n : {100, 200, 400, 800, 1600, 3200})
            cells.emplace_back(n, 0.7 * std::pow(n, -0.3) * std::exp(noise(rng)));
        const auto g = fit_rate(cells);
        covered += std::abs(g.slope + 0.3) <= 3.0 * g.slope_se;
    }
    // 3 se with 4 residual degrees of freedom covers about 96% of fits.
    CHECK(covered >= 180);

    std::vector<std::pair<std::size_t, double>> zeros = {{10, 0.1}, {20, 0.0}, {40, 0.05}, {80, 0.03}};
    const auto z = fit_rate(zeros);
    CHECK(z.excluded == std::vector<std::size_t>{20});
    CHECK(z.pairs.size() == 3);
    zeros[0].second = 0.0;
    CHECK_THROWS_AS(fit_rate(zeros), ConfigError);
}

TEST_CASE("run_ks_cell: contract, determinism across workers, attached bounds") {
    auto c = small_config(Family::student_t, 3);
    const auto base = run_ks_cell(c, 40);
    CHECK(base.delta_hat >= 0.0);
    CHECK(base.delta_hat <= 1.0);
    CHECK(base.se > 0.0);
    CHECK(base.n == 40);
    CHECK(base.d == 3);
    CHECK(base.bound_report.convention == "structural C=1");
    CHECK(base.bound_report.term_tail == base.moments.tail_prob);
    CHECK(base.bound_report.total_theorem1 ==
          theorem1_bound({40, 3, base.moments.mu1, base.moments.mu3, base.moments.tail_prob}).total_theorem1);
    CHECK(base.diagnostics.flag_free_checked + base.diagnostics.trunc_event_rate * c.M ==
          doctest::Approx(static_cast<double>(c.M)));
    CHECK(base.diagnostics.in_band_checked == static_cast<std::size_t>(base.diagnostics.in_band_rate * c.M + 0.5));
    CHECK(1.0 - base.diagnostics.in_band_rate <= base.diagnostics.chebyshev_band_bound + 0.05);

    const std::string reference = nlohmann::json(base).dump();
    for (std::size_t w : {4, 8}) {
        c.workers = w;
        CHECK(nlohmann::json(run_ks_cell(c, 40)).dump() == reference);
    }
}

TEST_CASE("run_ks_cell: Monte Carlo references and truncation modes") {
    auto c = small_config(Family::gaussian, 4);
    c.dist.covariance = {CovarianceKind::equicorrelated, 4, 0.3};
    for (auto ref : {Reference::z_prime, Reference::z_corr}) {
        for (auto mode : {TruncationMode::per_coordinate, TruncationMode::global}) {
            c.reference = ref;
            c.truncation_mode = mode;
            const auto r = run_ks_cell(c, 30);
            CHECK(r.reference == ref);
            CHECK(r.levels.mode == mode);
            INFO(to_string(ref), " ", to_string(mode));
            CHECK(r.se > 0.0);
            if (ref == Reference::z_prime && mode == TruncationMode::global) {
                // One level for all coordinates leaves n E[Y_j^2] < 1, so Z' is under-dispersed
                // relative to T_n; the comparison term has to cover the gap.
                CHECK(r.bound_report.term_comparison.sqrt_variant >= r.delta_hat);
            } else {
                CHECK(r.delta_hat < 0.2);
            }
        }
    }
}

TEST_CASE("run_ks_cell: seed consistency") {
    auto c = small_config(Family::gaussian, 1);
    c.M = 2000;
    c.M_ref = 2000;
    const auto a = run_ks_cell(c, 50);
    c.master_seed = 4242;
    const auto b = run_ks_cell(c, 50);
    CHECK(a.delta_hat != b.delta_hat);
    CHECK(std::abs(a.delta_hat - b.delta_hat) <= 4.0 * std::max(a.se, b.se));
}

TEST_CASE("rate_sweep: one cell per n, reproducible under seed change") {
    auto c = small_config(Family::gaussian, 2);
    const auto first = rate_sweep(c);
    REQUIRE(first.size() == 3);
    for (std::size_t k = 0; k < 3; ++k) CHECK(first[k].n == c.n_grid[k]);
    c.master_seed = 7;
    const auto second = rate_sweep(c);
    for (std::size_t k = 0; k < 3; ++k)
        CHECK(std::abs(first[k].delta_hat - second[k].delta_hat) <=
              4.0 * std::max(first[k].se, second[k].se));
    c.n_grid = {10, 20};
    CHECK_THROWS_AS(rate_sweep(c), ConfigError);
}

TEST_CASE("reports: CSV and JSON") {
    const auto empty = render_report(make_report({}, std::nullopt), ReportFormat::csv);
    CHECK(empty ==
          "n,d,delta_hat,se,argmax_t,bound_total,bound_tail,bound_mu1_term,bound_mu3_term,"
          "corollary_value,trunc_event_rate,in_band_rate\n");

    const auto results = rate_sweep(small_config(Family::student_t, 2));
    const auto fit = fit_rate(results);
    const auto csv = temp_path("report.csv");
    const auto json = temp_path("report.json");
    emit_report(results, fit, csv, ReportFormat::csv);
    emit_report(results, fit, json, ReportFormat::json);

    const auto from_csv = load_report(csv);
    CHECK(from_csv.rows.size() == results.size());
    CHECK(from_csv.rows == rows_of(results));

    const auto from_json = load_report(json);
    CHECK(from_json.rows == rows_of(results));
    REQUIRE(from_json.fit.has_value());
    CHECK(from_json.fit->slope == fit.slope);
    CHECK(from_json.fit->slope_se == fit.slope_se);
    CHECK(from_json.cells.size() == results.size());
    CHECK(from_json.cells[0].at("bound_report").at("convention") == "structural C=1");

    // Converting formats preserves the rows exactly.
    const auto again = temp_path("again.csv");
    write_report(from_json, again, ReportFormat::csv);
    CHECK(load_report(again).rows == from_csv.rows);

    const auto r = report_row(results[1]);
    CHECK(r.bound_total == results[1].bound_report.total_theorem1);
    CHECK(r.bound_mu3_term == results[1].bound_report.term_mu3);
    CHECK(r.corollary_value == results[1].bound_report.corollary.value);
}

TEST_CASE("reports: I/O errors carry the path") {
    const std::filesystem::path bad = "/nonexistent-dir/snclt/report.csv";
    try {
        emit_report({}, std::nullopt, bad, ReportFormat::csv);
        FAIL("expected IoError");
    } catch (const IoError& e) {
        CHECK(std::string(e.what()).find(bad.string()) != std::string::npos);
    }
    const auto broken = temp_path("broken.csv");
    oracle::write_text(broken,
                       "n,d,delta_hat,se,argmax_t,bound_total,bound_tail,bound_mu1_term,"
                       "bound_mu3_term,corollary_value,trunc_event_rate,in_band_rate\n1,2,3\n");
    try {
        load_report(broken);
        FAIL("expected IoError");
    } catch (const IoError& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
    oracle::write_text(temp_path("x.txt"), "n\n");
    CHECK_THROWS_AS(load_report(temp_path("x.txt")), ConfigError);
}
