#include "snclt/harness.hpp"

#include "detail/format.hpp"
#include "detail/parallel.hpp"
#include "snclt/error.hpp"
#include "snclt/rng.hpp"
#include "snclt/statistics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace snclt {

namespace {

constexpr double kTiltTolerance = 1e-10;
constexpr double kMaxDegenerateRate = 0.01;

// Per-replication record, written by index and reduced sequentially afterwards.
struct Replication {
    double tn = 0.0;
    bool truncated = false;
    bool in_band = false;
    bool degenerate = false;
    double max_eta_sq = 0.0;
    UstatDiagnostics ustat;
};

double positive_floor(double se, std::size_t m) {
    return std::max(se, 1.0 / static_cast<double>(m));
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("read from '" + path.string() + "' failed");
    return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << text;
    out.flush();
    if (!out) throw IoError("write to '" + path.string() + "' failed");
}

bool finite_variance(const DistributionSpec& dist) {
    return std::isfinite(Marginal(dist.family, dist.shape, 1.0).second_moment());
}

// Inputs for the hyperrectangle bound and the corollary, estimated on the pilot.
struct PilotMoments {
    double nu3 = 0.0;
    double B_n = 1.0;
    double D_n = 1.0;
};

PilotMoments pilot_moments(const DistributionSpec& dist, const Eigen::MatrixXd& x,
                           const Eigen::MatrixXd& y, std::size_t n) {
    PilotMoments out;
    const double rows = static_cast<double>(x.rows());
    if (finite_variance(dist)) {
        double acc = 0.0;
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            double m = 0.0;
            for (Eigen::Index j = 0; j < x.cols(); ++j)
                m = std::max(m, std::abs(x(i, j)) / dist.scale_of(static_cast<std::size_t>(j)));
            acc += m * m * m;
        }
        out.nu3 = acc / rows;
    } else {
        out.nu3 = std::numeric_limits<double>::infinity();
    }
    const double root_n = std::sqrt(static_cast<double>(n));
    double fourth = 0.0;
    for (Eigen::Index j = 0; j < y.cols(); ++j)
        fourth = std::max(fourth, y.col(j).array().pow(4).sum() / rows);
    double cube = 0.0;
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
        const double m = y.row(i).cwiseAbs().maxCoeff();
        cube += m * m * m;
    }
    out.B_n = std::max(1.0, root_n * std::pow(fourth, 0.25));
    out.D_n = std::max(1.0, root_n * std::cbrt(cube / rows));
    return out;
}

void require_same(double a, double b, const char* what) {
    if (a != b) {
        std::ostringstream msg;
        msg.precision(17);
        msg << "internal invariant violated: " << what << " (" << a << " vs " << b << ")";
        throw std::logic_error(msg.str());
    }
}

}  // namespace

std::string_view to_string(Reference r) {
    switch (r) {
        case Reference::z_prime: return "z_prime";
        case Reference::z_corr: return "z_corr";
        case Reference::exact_diag: return "exact_diag";
    }
    return "exact_diag";
}

Reference parse_reference(std::string_view s) {
    if (s == "z_prime") return Reference::z_prime;
    if (s == "z_corr") return Reference::z_corr;
    if (s == "exact_diag") return Reference::exact_diag;
    throw ConfigError("unknown reference '" + std::string(s) +
                      "' (expected z_prime, z_corr or exact_diag)");
}

std::string_view to_string(ReportFormat f) { return f == ReportFormat::csv ? "csv" : "json"; }

ReportFormat parse_report_format(std::string_view s) {
    if (s == "csv") return ReportFormat::csv;
    if (s == "json") return ReportFormat::json;
    throw ConfigError("unknown format '" + std::string(s) + "' (expected csv or json)");
}

void to_json(nlohmann::json& j, const CovarianceSpec& c) {
    j = nlohmann::json{{"kind", to_string(c.kind)}, {"d", c.d}, {"rho", c.rho}};
}

void to_json(nlohmann::json& j, const DistributionSpec& d) {
    j = nlohmann::json{{"family", to_string(d.family)},
                       {"shape", d.shape},
                       {"d", d.d},
                       {"covariance", d.covariance},
                       {"scale", d.scale}};
}

void from_json(const nlohmann::json& j, DistributionSpec& d) {
    d = DistributionSpec{};
    d.family = parse_family(j.at("family").get<std::string>());
    d.shape = j.value("shape", 0.0);
    d.d = j.at("d").get<std::size_t>();
    d.covariance.d = d.d;
    if (j.contains("covariance")) {
        const auto& c = j.at("covariance");
        d.covariance.kind = parse_covariance_kind(c.value("kind", std::string("identity")));
        d.covariance.rho = c.value("rho", 0.0);
        d.covariance.d = c.value("d", d.d);
    }
    if (j.contains("scale")) d.scale = j.at("scale").get<std::vector<double>>();
}

void ExperimentConfig::validate() const {
    dist.validate();
    if (M < 100) throw ConfigError("M must be >= 100");
    if (M_ref < M) throw ConfigError("M_ref must be >= M");
    if (grid_size < 64) throw ConfigError("grid_size must be >= 64");
    if (n_grid.empty()) throw ConfigError("n_grid must not be empty");
    for (std::size_t k = 0; k < n_grid.size(); ++k) {
        if (n_grid[k] < 2) throw ConfigError("every n in n_grid must be >= 2");
        if (k > 0 && n_grid[k] <= n_grid[k - 1])
            throw ConfigError("n_grid must be strictly increasing");
    }
    if (workers < 1) throw ConfigError("workers must be >= 1");
    if (reference == Reference::exact_diag && !dist.covariance.is_identity())
        throw ConfigError("reference exact_diag requires identity covariance");
}

void to_json(nlohmann::json& j, const ExperimentConfig& c) {
    j = nlohmann::json{{"dist", c.dist},
                       {"n_grid", c.n_grid},
                       {"M", c.M},
                       {"M_ref", c.M_ref},
                       {"reference", to_string(c.reference)},
                       {"truncation_mode", to_string(c.truncation_mode)},
                       {"master_seed", c.master_seed},
                       {"grid_size", c.grid_size},
                       {"workers", c.workers},
                       {"pilot_size", c.pilot_size}};
}

void from_json(const nlohmann::json& j, ExperimentConfig& c) {
    static const std::vector<std::string> known = {
        "dist",      "n_grid",      "M",         "M_ref",   "reference", "truncation_mode",
        "master_seed", "grid_size", "workers", "pilot_size"};
    for (const auto& item : j.items())
        if (std::find(known.begin(), known.end(), item.key()) == known.end())
            throw ConfigError("unknown config field '" + item.key() + "'");
    c = ExperimentConfig{};
    j.at("dist").get_to(c.dist);
    j.at("n_grid").get_to(c.n_grid);
    c.M = j.value("M", c.M);
    c.M_ref = j.value("M_ref", c.M_ref);
    if (j.contains("reference")) c.reference = parse_reference(j.at("reference").get<std::string>());
    if (j.contains("truncation_mode"))
        c.truncation_mode = parse_truncation_mode(j.at("truncation_mode").get<std::string>());
    c.master_seed = j.value("master_seed", c.master_seed);
    c.grid_size = j.value("grid_size", c.grid_size);
    c.workers = j.value("workers", c.workers);
    c.pilot_size = j.value("pilot_size", c.pilot_size);
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    const std::string text = read_file(path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
    }
    ExperimentConfig c;
    try {
        c = j.get<ExperimentConfig>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config '" + path.string() + "': " + e.what());
    }
    c.validate();
    return c;
}

KSDistance ks_one_sample(std::vector<double> sample, double (*cdf)(double, std::size_t),
                         std::size_t d) {
    if (sample.empty()) throw ConfigError("KS distance of an empty sample");
    std::sort(sample.begin(), sample.end());
    const double m = static_cast<double>(sample.size());
    KSDistance best;
    best.distance = -1.0;
    std::size_t i = 0;
    while (i < sample.size()) {
        std::size_t k = i;
        while (k < sample.size() && sample[k] == sample[i]) ++k;
        // ECDF jumps from i/m to k/m at sample[i]; the continuous CDF is F there.
        const double f = cdf(sample[i], d);
        const double below = static_cast<double>(i) / m;
        const double above = static_cast<double>(k) / m;
        if (std::abs(f - below) > best.distance)
            best = {std::abs(f - below), sample[i], below, f};
        if (std::abs(above - f) > best.distance) best = {std::abs(above - f), sample[i], above, f};
        i = k;
    }
    return best;
}

KSDistance ks_two_sample(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw ConfigError("KS distance of an empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double ma = static_cast<double>(a.size());
    const double mb = static_cast<double>(b.size());
    KSDistance best;
    std::size_t i = 0;
    std::size_t k = 0;
    while (i < a.size() || k < b.size()) {
        const double t = k >= b.size() || (i < a.size() && a[i] <= b[k]) ? a[i] : b[k];
        while (i < a.size() && a[i] == t) ++i;
        while (k < b.size() && b[k] == t) ++k;
        const double fa = static_cast<double>(i) / ma;
        const double fb = static_cast<double>(k) / mb;
        if (std::abs(fa - fb) > best.distance) best = {std::abs(fa - fb), t, fa, fb};
    }
    return best;
}

KSResult run_ks_cell(const ExperimentConfig& config, std::size_t n) {
    config.validate();
    if (n < 2) throw ConfigError("cell sample size n must be >= 2");
    const DistributionSpec& dist = config.dist;
    const std::size_t d = dist.d;
    const bool identity = dist.covariance.is_identity();
    const Eigen::MatrixXd factor = identity ? Eigen::MatrixXd() : covariance_factor(dist.covariance);

    KSResult out;
    out.n = n;
    out.d = d;
    out.reference = config.reference;

    // Pilot sample: Z' covariance, moment inputs and, without an analytic marginal, the levels.
    const std::size_t pilot_rows = std::max(n, config.pilot_size);
    Eigen::MatrixXd pilot(static_cast<Eigen::Index>(pilot_rows), static_cast<Eigen::Index>(d));
    {
        Engine engine(derive_seed(config.master_seed, {stream::pilot, n}));
        fill_rows(dist, factor, engine, pilot);
    }
    if (identity) {
        out.levels = solve_levels(dist, n, config.truncation_mode);
        out.moments = moment_report(dist, out.levels, n);
    } else {
        SampleMatrix pilot_sample{pilot, std::nullopt};
        out.levels = solve_levels(pilot_sample, n, config.truncation_mode);
        out.moments = moment_report(pilot_sample, out.levels, n);
    }
    const Eigen::MatrixXd pilot_y = truncate(pilot, out.levels, n).y;
    const GaussianSpec omega = make_gaussian_spec(build_covariance(dist.covariance));
    const GaussianSpec omega_prime = covariance_from_sample(pilot_y, static_cast<double>(n));
    const PilotMoments pm = pilot_moments(dist, pilot, pilot_y, n);

    // Reference draws.
    std::vector<double> reference_draws;
    if (config.reference != Reference::exact_diag) {
        const GaussianSpec& ref = config.reference == Reference::z_prime ? omega_prime : omega;
        reference_draws = sample_max(ref, config.M_ref,
                                     derive_seed(config.master_seed, {stream::reference, n}),
                                     config.workers);
    }

    // Replications.
    std::vector<Replication> reps(config.M);
    detail::parallel_chunks(config.M, config.workers, [&](std::size_t begin, std::size_t end) {
        Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
        for (std::size_t r = begin; r < end; ++r) {
            Engine engine(derive_seed(config.master_seed, {stream::replication, n, r}));
            fill_rows(dist, factor, engine, x);
            Replication& rep = reps[r];

            const Eigen::MatrixXd scaled = scale_by_levels(x, out.levels, n);
            const TruncatedSample trunc = truncate(x, out.levels, n);
            rep.truncated = trunc.any_truncated();
            try {
                const SelfNormalizedStat tn = self_normalized(scaled);
                rep.tn = tn.max_value;
                rep.degenerate = tn.degenerate_count() > 0;
            } catch (const DegeneracyError&) {
                rep.tn = 0.0;
                rep.degenerate = true;
            }

            const bool y_nonzero = (trunc.y.array() != 0.0).any();
            const double tny = y_nonzero ? self_normalized(trunc.y).max_value : 0.0;
            if (!rep.truncated) require_same(rep.tn, tny, "T_n != T_n^Y on a flag-free replication");

            const EtaVector e = eta(trunc);
            rep.in_band = e.all_in_band();
            rep.max_eta_sq = e.eta.size() ? e.eta.cwiseAbs2().maxCoeff() : 0.0;
            if (rep.in_band) {
                const double tilted = tilted_sum(trunc).max_value;
                if (!(std::abs(tilted - tny) <= kTiltTolerance)) {
                    std::ostringstream msg;
                    msg.precision(17);
                    msg << "internal invariant violated: tilted sum " << tilted
                        << " != T_n^Y " << tny << " on an in-band replication";
                    throw std::logic_error(msg.str());
                }
            }
            rep.ustat = ustat_diagnostics(trunc);
        }
    });

    // Sequential reduction in replication order.
    std::vector<double> stats(config.M);
    std::size_t truncated = 0, in_band = 0, degenerate = 0, flag_free = 0;
    double eta_sq = 0.0;
    UstatDiagnostics u;
    for (std::size_t r = 0; r < config.M; ++r) {
        const Replication& rep = reps[r];
        stats[r] = rep.tn;
        truncated += rep.truncated;
        flag_free += !rep.truncated;
        in_band += rep.in_band;
        degenerate += rep.degenerate;
        eta_sq += rep.max_eta_sq;
        u.u_max += rep.ustat.u_max;
        u.s1 += rep.ustat.s1;
        u.s2 += rep.ustat.s2;
        u.s3 += rep.ustat.s3;
    }
    const double m = static_cast<double>(config.M);
    auto& diag = out.diagnostics;
    diag.trunc_event_rate = static_cast<double>(truncated) / m;
    diag.in_band_rate = static_cast<double>(in_band) / m;
    diag.chebyshev_band_bound = 4.0 * eta_sq / m;
    diag.degenerate_rate = static_cast<double>(degenerate) / m;
    diag.mean_ustat = {u.u_max / m, u.s1 / m, u.s2 / m, u.s3 / m};
    diag.flag_free_checked = flag_free;
    diag.in_band_checked = in_band;
    if (diag.degenerate_rate > kMaxDegenerateRate) {
        std::ostringstream msg;
        msg << "cell n=" << n << ": " << degenerate << " of " << config.M
            << " replications have a degenerate (all-zero) coordinate";
        throw DegeneracyError(msg.str());
    }

    // KS distance and its standard-error proxy.
    KSDistance ks;
    double se2 = 0.0;
    if (config.reference == Reference::exact_diag) {
        ks = ks_one_sample(stats, &max_cdf_diag, d);
    } else {
        ks = ks_two_sample(stats, reference_draws);
        se2 += ks.f_reference * (1.0 - ks.f_reference) / static_cast<double>(config.M_ref);
    }
    se2 += ks.f_sample * (1.0 - ks.f_sample) / m;
    out.delta_hat = std::clamp(ks.distance, 0.0, 1.0);
    out.argmax_t = ks.argmax_t;
    out.se = positive_floor(std::sqrt(se2), config.M);

    BoundInputs in;
    in.n = n;
    in.d = d;
    in.mu1 = out.moments.mu1;
    in.mu3 = out.moments.mu3;
    in.tail_prob = out.moments.tail_prob;
    in.r_n = out.moments.r_n;
    in.delta = 1.0;
    in.nu_2delta = pm.nu3;
    in.varpi = discrepancy(omega_prime, omega);
    in.lambda_min = omega.lambda_min;
    in.B_n = pm.B_n;
    in.D_n = pm.D_n;
    in.q = 3.0;
    out.bound_report = theorem1_bound(in);
    out.lemma_rhs = lemma_rhs_diagnostics(in.mu1, in.mu3, n, d, in.tail_prob);
    return out;
}

std::vector<KSResult> rate_sweep(const ExperimentConfig& config) {
    config.validate();
    if (config.n_grid.size() < 3) throw ConfigError("rate sweep needs at least 3 sample sizes");
    std::vector<KSResult> out;
    out.reserve(config.n_grid.size());
    for (std::size_t n : config.n_grid) out.push_back(run_ks_cell(config, n));
    return out;
}

RateFit fit_rate(const std::vector<std::pair<std::size_t, double>>& cells) {
    RateFit fit;
    for (const auto& [n, delta] : cells) {
        if (delta > 0.0)
            fit.pairs.emplace_back(std::log(static_cast<double>(n)), std::log(delta));
        else
            fit.excluded.push_back(n);
    }
    const std::size_t k = fit.pairs.size();
    if (k < 3)
        throw ConfigError("rate fit needs at least 3 cells with delta_hat > 0 (have " +
                          std::to_string(k) + ")");
    double mx = 0.0, my = 0.0;
    for (const auto& [x, y] : fit.pairs) {
        mx += x;
        my += y;
    }
    mx /= static_cast<double>(k);
    my /= static_cast<double>(k);
    double sxx = 0.0, sxy = 0.0;
    for (const auto& [x, y] : fit.pairs) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if (!(sxx > 0.0)) throw DegeneracyError("rate fit: all sample sizes coincide");
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double rss = 0.0;
    for (const auto& [x, y] : fit.pairs) {
        const double e = y - fit.intercept - fit.slope * x;
        rss += e * e;
    }
    fit.slope_se = std::sqrt(rss / static_cast<double>(k - 2) / sxx);
    return fit;
}

RateFit fit_rate(const std::vector<KSResult>& results) {
    std::vector<std::pair<std::size_t, double>> cells;
    cells.reserve(results.size());
    for (const auto& r : results) cells.emplace_back(r.n, r.delta_hat);
    return fit_rate(cells);
}

void to_json(nlohmann::json& j, const RateFit& f) {
    j = nlohmann::json{{"pairs", f.pairs},
                       {"slope", f.slope},
                       {"intercept", f.intercept},
                       {"slope_se", f.slope_se},
                       {"excluded", f.excluded}};
}

void from_json(const nlohmann::json& j, RateFit& f) {
    j.at("pairs").get_to(f.pairs);
    j.at("slope").get_to(f.slope);
    j.at("intercept").get_to(f.intercept);
    j.at("slope_se").get_to(f.slope_se);
    f.excluded = j.value("excluded", std::vector<std::size_t>{});
}

void to_json(nlohmann::json& j, const KSResult& r) {
    const auto& dg = r.diagnostics;
    j = nlohmann::json{
        {"n", r.n},
        {"d", r.d},
        {"delta_hat", r.delta_hat},
        {"se", r.se},
        {"argmax_t", r.argmax_t},
        {"reference", to_string(r.reference)},
        {"levels", r.levels},
        {"moments", r.moments},
        {"bound_report", r.bound_report},
        {"lemma_rhs", r.lemma_rhs},
        {"diagnostics",
         {{"trunc_event_rate", dg.trunc_event_rate},
          {"in_band_rate", dg.in_band_rate},
          {"chebyshev_band_bound", dg.chebyshev_band_bound},
          {"degenerate_rate", dg.degenerate_rate},
          {"mean_ustat",
           {{"u_max", dg.mean_ustat.u_max},
            {"s1", dg.mean_ustat.s1},
            {"s2", dg.mean_ustat.s2},
            {"s3", dg.mean_ustat.s3}}},
          {"flag_free_checked", dg.flag_free_checked},
          {"in_band_checked", dg.in_band_checked}}}};
}

ReportRow report_row(const KSResult& r) {
    ReportRow row;
    row.n = r.n;
    row.d = r.d;
    row.delta_hat = r.delta_hat;
    row.se = r.se;
    row.argmax_t = r.argmax_t;
    row.bound_total = r.bound_report.total_theorem1;
    row.bound_tail = r.bound_report.term_tail;
    row.bound_mu1_term = r.bound_report.term_mu1;
    row.bound_mu3_term = r.bound_report.term_mu3;
    row.corollary_value = r.bound_report.corollary.value;
    row.trunc_event_rate = r.diagnostics.trunc_event_rate;
    row.in_band_rate = r.diagnostics.in_band_rate;
    return row;
}

void to_json(nlohmann::json& j, const ReportRow& r) {
    j = nlohmann::json{{"n", r.n},
                       {"d", r.d},
                       {"delta_hat", r.delta_hat},
                       {"se", r.se},
                       {"argmax_t", r.argmax_t},
                       {"bound_total", r.bound_total},
                       {"bound_tail", r.bound_tail},
                       {"bound_mu1_term", r.bound_mu1_term},
                       {"bound_mu3_term", r.bound_mu3_term},
                       {"corollary_value", r.corollary_value},
                       {"trunc_event_rate", r.trunc_event_rate},
                       {"in_band_rate", r.in_band_rate}};
}

void from_json(const nlohmann::json& j, ReportRow& r) {
    j.at("n").get_to(r.n);
    j.at("d").get_to(r.d);
    j.at("delta_hat").get_to(r.delta_hat);
    j.at("se").get_to(r.se);
    j.at("argmax_t").get_to(r.argmax_t);
    j.at("bound_total").get_to(r.bound_total);
    j.at("bound_tail").get_to(r.bound_tail);
    j.at("bound_mu1_term").get_to(r.bound_mu1_term);
    j.at("bound_mu3_term").get_to(r.bound_mu3_term);
    j.at("corollary_value").get_to(r.corollary_value);
    j.at("trunc_event_rate").get_to(r.trunc_event_rate);
    j.at("in_band_rate").get_to(r.in_band_rate);
}

Report make_report(const std::vector<KSResult>& results, const std::optional<RateFit>& fit) {
    Report report;
    report.fit = fit;
    for (const auto& r : results) {
        report.rows.push_back(report_row(r));
        report.cells.push_back(r);
    }
    return report;
}

std::string render_report(const Report& report, ReportFormat format) {
    if (format == ReportFormat::json) {
        nlohmann::json j{{"rows", report.rows},
                         {"fit", report.fit ? nlohmann::json(*report.fit) : nlohmann::json(nullptr)},
                         {"cells", report.cells},
                         {"note",
                          "distances are measured against fixed Gaussian references and "
                          "upper-bound the best approximation over the Gaussian class"}};
        return j.dump(2) + "\n";
    }
    std::string out;
    for (std::size_t c = 0; c < std::size(kReportColumns); ++c) {
        if (c) out += ',';
        out += kReportColumns[c];
    }
    out += '\n';
    using detail::format_double;
    for (const auto& r : report.rows) {
        out += std::to_string(r.n) + ',' + std::to_string(r.d) + ',' + format_double(r.delta_hat) +
               ',' + format_double(r.se) + ',' + format_double(r.argmax_t) + ',' +
               format_double(r.bound_total) + ',' + format_double(r.bound_tail) + ',' +
               format_double(r.bound_mu1_term) + ',' + format_double(r.bound_mu3_term) + ',' +
               format_double(r.corollary_value) + ',' + format_double(r.trunc_event_rate) + ',' +
               format_double(r.in_band_rate) + '\n';
    }
    return out;
}

void write_report(const Report& report, const std::filesystem::path& path, ReportFormat format) {
    write_file(path, render_report(report, format));
}

void emit_report(const std::vector<KSResult>& results, const std::optional<RateFit>& fit,
                 const std::filesystem::path& path, ReportFormat format) {
    write_report(make_report(results, fit), path, format);
}

namespace {

Report parse_csv_report(const std::string& text, const std::filesystem::path& path) {
    std::istringstream in(text);
    std::string line;
    const auto where = [&](std::size_t row) {
        return "report '" + path.string() + "' line " + std::to_string(row);
    };
    if (!std::getline(in, line)) throw IoError("report '" + path.string() + "' is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string expected;
    for (std::size_t c = 0; c < std::size(kReportColumns); ++c)
        expected += (c ? "," : "") + std::string(kReportColumns[c]);
    if (line != expected) throw IoError(where(1) + ": unexpected header '" + line + "'");

    Report report;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<double> v;
        std::size_t start = 0;
        for (std::size_t col = 0;; ++col) {
            const std::size_t stop = line.find(',', start);
            const std::string cell = line.substr(start, stop == std::string::npos ? stop : stop - start);
            double value = 0.0;
            const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
            if (ec != std::errc() || ptr != cell.data() + cell.size())
                throw IoError(where(lineno) + " column " + std::to_string(col + 1) +
                              ": non-numeric cell '" + cell + "'");
            v.push_back(value);
            if (stop == std::string::npos) break;
            start = stop + 1;
        }
        if (v.size() != std::size(kReportColumns))
            throw IoError(where(lineno) + ": expected " + std::to_string(std::size(kReportColumns)) +
                          " columns, found " + std::to_string(v.size()));
        ReportRow r;
        r.n = static_cast<std::size_t>(v[0]);
        r.d = static_cast<std::size_t>(v[1]);
        r.delta_hat = v[2];
        r.se = v[3];
        r.argmax_t = v[4];
        r.bound_total = v[5];
        r.bound_tail = v[6];
        r.bound_mu1_term = v[7];
        r.bound_mu3_term = v[8];
        r.corollary_value = v[9];
        r.trunc_event_rate = v[10];
        r.in_band_rate = v[11];
        report.rows.push_back(r);
    }
    return report;
}

}  // namespace

Report load_report(const std::filesystem::path& path) {
    const std::string text = read_file(path);
    const auto ext = path.extension().string();
    if (ext == ".csv") return parse_csv_report(text, path);
    if (ext != ".json")
        throw ConfigError("cannot infer report format from '" + path.string() +
                          "' (expected .csv or .json)");
    try {
        const auto j = nlohmann::json::parse(text);
        Report report;
        j.at("rows").get_to(report.rows);
        if (j.contains("fit") && !j.at("fit").is_null()) report.fit = j.at("fit").get<RateFit>();
        if (j.contains("cells")) report.cells = j.at("cells");
        return report;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("report '" + path.string() + "': " + e.what());
    }
}

}  // namespace snclt
