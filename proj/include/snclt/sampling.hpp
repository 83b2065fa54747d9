#pragma once

#include "snclt/rng.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace snclt {

enum class Family { gaussian, student_t, symmetric_pareto, rademacher };
enum class CovarianceKind { identity, equicorrelated, ar1 };
enum class TableFormat { csv, tsv };

std::string_view to_string(Family f);
std::string_view to_string(CovarianceKind k);
Family parse_family(std::string_view s);
CovarianceKind parse_covariance_kind(std::string_view s);
TableFormat parse_table_format(std::string_view s);

struct CovarianceSpec {
    CovarianceKind kind = CovarianceKind::identity;
    std::size_t d = 1;
    double rho = 0.0;

    /// Throws ConfigError when rho is outside the PSD-admissible range for `kind`.
    void validate() const;
    bool is_identity() const noexcept;
};

struct DistributionSpec {
    Family family = Family::gaussian;
    /// Degrees of freedom (student_t) or tail index (symmetric_pareto); unused otherwise.
    double shape = 0.0;
    std::size_t d = 1;
    CovarianceSpec covariance{};
    /// Per-coordinate positive scale; empty means all ones.
    std::vector<double> scale;

    void validate() const;
    double scale_of(std::size_t j) const noexcept { return scale.empty() ? 1.0 : scale[j]; }
};

struct SampleMatrix {
    /// n x d, one observation per row.
    Eigen::MatrixXd data;
    /// Master seed of the generator, or nullopt for external data.
    std::optional<std::uint64_t> seed;

    std::size_t n() const noexcept { return static_cast<std::size_t>(data.rows()); }
    std::size_t d() const noexcept { return static_cast<std::size_t>(data.cols()); }
};

Eigen::MatrixXd build_covariance(const CovarianceSpec& spec);

/// Lower factor L of build_covariance(spec) with L L^T = Sigma.
Eigen::MatrixXd covariance_factor(const CovarianceSpec& spec);

SampleMatrix generate_sample(const DistributionSpec& dist, std::size_t n, std::uint64_t seed);

/// Draws rows.rows() IID observations into `rows` using `engine`.
/// `factor` is covariance_factor(dist.covariance), or empty for the identity.
void fill_rows(const DistributionSpec& dist, const Eigen::MatrixXd& factor, Engine& engine,
               Eigen::Ref<Eigen::MatrixXd> rows);

struct LoadOptions {
    TableFormat format = TableFormat::csv;
    bool header = false;
};

SampleMatrix load_sample(const std::filesystem::path& path, const LoadOptions& options = {});
void save_sample(const SampleMatrix& sample, const std::filesystem::path& path,
                 TableFormat format = TableFormat::csv);

/// Law of a single coordinate of a DistributionSpec with identity covariance.
///
/// All families are symmetric about 0. Quantities are expressed through |X| because
/// every truncated moment in this library depends on X only through X^2.
class Marginal {
public:
    Marginal(Family family, double shape, double scale);

    Family family() const noexcept { return family_; }
    bool is_discrete() const noexcept { return family_ == Family::rademacher; }

    /// P(|X| <= m).
    double abs_cdf(double m) const;
    /// P(|X| > m), computed without cancellation.
    double abs_sf(double m) const;
    /// P(X^2 > c2). Thresholds on X^2 are compared without square roots so that atoms
    /// sitting exactly on a truncation boundary are classified consistently.
    double sq_sf(double c2) const;
    /// E[|X|^p 1{lo2 < X^2 <= hi2}], hi2 may be +inf. May be +inf for heavy tails.
    double partial_moment(double p, double lo2, double hi2) const;
    /// E[X 1{lo2 < X^2 <= hi2}] by direct signed integration over both half-lines.
    double signed_partial_mean(double lo2, double hi2) const;
    /// E[X^2]; +inf when not finite.
    double second_moment() const;
    /// Points of |X| where the law is not smooth: atoms (rademacher) or the
    /// lower cutoff of the power-law density (symmetric_pareto).
    std::vector<double> breakpoints() const;
    /// Density of X (continuous families only).
    double pdf(double x) const;

private:
    Family family_;
    double shape_;
    double scale_;
    // Student-t standardisation factor or Pareto lower cutoff, already multiplied by scale.
    double unit_;
};

Marginal coordinate_marginal(const DistributionSpec& dist, std::size_t j);

}  // namespace snclt
