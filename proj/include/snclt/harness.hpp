#pragma once

#include "snclt/bounds.hpp"
#include "snclt/gaussian.hpp"
#include "snclt/sampling.hpp"
#include "snclt/statistics.hpp"
#include "snclt/truncation.hpp"

#include <nlohmann/json.hpp>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace snclt {

enum class Reference { z_prime, z_corr, exact_diag };
enum class ReportFormat { csv, json };

std::string_view to_string(Reference r);
Reference parse_reference(std::string_view s);
std::string_view to_string(ReportFormat f);
ReportFormat parse_report_format(std::string_view s);

void to_json(nlohmann::json& j, const CovarianceSpec& c);
void to_json(nlohmann::json& j, const DistributionSpec& d);
/// Missing covariance.d defaults to the enclosing d.
void from_json(const nlohmann::json& j, DistributionSpec& d);

struct ExperimentConfig {
    DistributionSpec dist;
    std::vector<std::size_t> n_grid;
    std::size_t M = 1000;
    std::size_t M_ref = 10000;
    Reference reference = Reference::exact_diag;
    TruncationMode truncation_mode = TruncationMode::per_coordinate;
    std::uint64_t master_seed = 0;
    /// Validated only: the exact reference is compared at every jump of the
    /// empirical CDF, which is finer than any fixed grid.
    std::size_t grid_size = 4096;
    std::size_t workers = 1;
    /// Size of the pilot sample that feeds levels (non-identity covariance), Z', B_n, D_n
    /// and nu_3. The effective size is max(n, pilot_size).
    std::size_t pilot_size = 100000;

    void validate() const;
};

void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);
ExperimentConfig load_config(const std::filesystem::path& path);

struct CellDiagnostics {
    /// Fraction of replications with at least one truncated entry.
    double trunc_event_rate = 0.0;
    /// Fraction of replications with every |1 + eta_j| inside [1/4, 7/4].
    double in_band_rate = 0.0;
    /// 4 * mean of max_j eta_j^2, an upper bound on 1 - in_band_rate (reported only).
    double chebyshev_band_bound = 0.0;
    double degenerate_rate = 0.0;
    UstatDiagnostics mean_ustat;
    /// Replications on which T_n = T_n^Y and the tilted sum were cross-checked.
    std::size_t flag_free_checked = 0;
    std::size_t in_band_checked = 0;
};

struct KSResult {
    std::size_t n = 0;
    std::size_t d = 0;
    double delta_hat = 0.0;
    double se = 0.0;
    double argmax_t = 0.0;
    Reference reference = Reference::exact_diag;
    TruncationLevels levels;
    TruncatedMomentReport moments;
    BoundReport bound_report;
    LemmaRhs lemma_rhs;
    CellDiagnostics diagnostics;
};

void to_json(nlohmann::json& j, const KSResult& r);

/// KS distance between an empirical sample and a continuous CDF, evaluated at every jump.
struct KSDistance {
    double distance = 0.0;
    double argmax_t = 0.0;
    double f_sample = 0.0;
    double f_reference = 0.0;
};
KSDistance ks_one_sample(std::vector<double> sample, double (*cdf)(double, std::size_t),
                         std::size_t d);
/// sup_t |F_a(t) - F_b(t)| over the pooled order statistics.
KSDistance ks_two_sample(std::vector<double> a, std::vector<double> b);

KSResult run_ks_cell(const ExperimentConfig& config, std::size_t n);
std::vector<KSResult> rate_sweep(const ExperimentConfig& config);

struct RateFit {
    std::vector<std::pair<double, double>> pairs;
    double slope = 0.0;
    double intercept = 0.0;
    double slope_se = 0.0;
    /// Sample sizes dropped because delta_hat = 0.
    std::vector<std::size_t> excluded;
};

void to_json(nlohmann::json& j, const RateFit& f);
void from_json(const nlohmann::json& j, RateFit& f);

RateFit fit_rate(const std::vector<KSResult>& results);
/// OLS on (log n, log delta) pairs; the building block of fit_rate.
RateFit fit_rate(const std::vector<std::pair<std::size_t, double>>& cells);

/// One plot-ready row per cell.
struct ReportRow {
    std::size_t n = 0;
    std::size_t d = 0;
    double delta_hat = 0.0;
    double se = 0.0;
    double argmax_t = 0.0;
    double bound_total = 0.0;
    double bound_tail = 0.0;
    double bound_mu1_term = 0.0;
    double bound_mu3_term = 0.0;
    double corollary_value = 0.0;
    double trunc_event_rate = 0.0;
    double in_band_rate = 0.0;

    bool operator==(const ReportRow&) const = default;
};

inline constexpr const char* kReportColumns[] = {
    "n",           "d",           "delta_hat",      "se",
    "argmax_t",    "bound_total", "bound_tail",     "bound_mu1_term",
    "bound_mu3_term", "corollary_value", "trunc_event_rate", "in_band_rate"};

ReportRow report_row(const KSResult& r);

struct Report {
    std::vector<ReportRow> rows;
    std::optional<RateFit> fit;
    /// Full per-cell records (JSON only); empty after reading a CSV.
    nlohmann::json cells = nlohmann::json::array();
};

void to_json(nlohmann::json& j, const ReportRow& r);
void from_json(const nlohmann::json& j, ReportRow& r);

Report make_report(const std::vector<KSResult>& results, const std::optional<RateFit>& fit);
void write_report(const Report& report, const std::filesystem::path& path, ReportFormat format);
std::string render_report(const Report& report, ReportFormat format);
void emit_report(const std::vector<KSResult>& results, const std::optional<RateFit>& fit,
                 const std::filesystem::path& path, ReportFormat format);
/// Format from the extension (.csv or .json).
Report load_report(const std::filesystem::path& path);

}  // namespace snclt
