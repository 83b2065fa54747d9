#pragma once

#include "snclt/sampling.hpp"

#include <nlohmann/json.hpp>

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <optional>
#include <string_view>
#include <vector>

namespace snclt {

enum class TruncationMode { per_coordinate, global };

std::string_view to_string(TruncationMode m);
TruncationMode parse_truncation_mode(std::string_view s);

/// Truncation levels a_j (per coordinate) or a_* (global), stored squared so the
/// censoring test X^2 <= a^2 n uses exactly the value the solver converged to.
struct TruncationLevels {
    TruncationMode mode = TruncationMode::per_coordinate;
    std::vector<double> level_sq;
    /// Sample size n of the defining equation E[X^2 1{X^2 <= b n}] = b.
    std::size_t n = 0;
    std::size_t iterations = 0;

    /// Squared level applying to coordinate j.
    double squared(std::size_t j) const {
        return mode == TruncationMode::global ? level_sq.front() : level_sq.at(j);
    }
    double level(std::size_t j) const;
    std::vector<double> levels() const;
};

struct TruncatedSample {
    Eigen::MatrixXd y;
    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> truncated;
    TruncationLevels levels;

    bool any_truncated() const { return truncated.any(); }
};

struct TruncatedMomentReport {
    double mu1 = 0.0;
    double mu3 = 0.0;
    double tail_prob = 0.0;
    double r_n = 0.0;
    std::vector<double> truncated_sq;
    /// Domain-of-attraction ratio at tau^2 = a_*^2 n; global mode only.
    std::optional<double> doa_ratio;
};

void to_json(nlohmann::json& j, const TruncatedMomentReport& r);
void from_json(const nlohmann::json& j, TruncatedMomentReport& r);
void to_json(nlohmann::json& j, const TruncationLevels& l);

/// psi_j(b) = E[X_j^2 1{X_j^2 <= b n}] under the empirical law of `sample`.
double truncated_second_moment(const SampleMatrix& sample, std::size_t j, double b, std::size_t n);
/// psi_j(b) by quadrature against the coordinate law (identity covariance only).
double truncated_second_moment(const DistributionSpec& dist, std::size_t j, double b, std::size_t n);

struct FixedPointOptions {
    double rel_tol = 1e-12;
    std::size_t max_iter = 10000;
};

struct FixedPointResult {
    double value = 0.0;
    std::size_t iterations = 0;
    std::vector<double> iterates;
};

/// Largest fixed point of a nondecreasing, right-continuous psi by monotone iteration
/// b_{k+1} = psi(b_k) started from b_0 = psi(upper), where upper >= every fixed point.
/// With exact = true the loop stops only on b_{k+1} == b_k (finitely many psi values).
FixedPointResult largest_fixed_point(const std::function<double(double)>& psi, double upper,
                                     bool exact, const FixedPointOptions& options = {});

TruncationLevels solve_levels(const SampleMatrix& sample, std::size_t n, TruncationMode mode);
TruncationLevels solve_levels(const DistributionSpec& dist, std::size_t n, TruncationMode mode,
                              const FixedPointOptions& options = {});

/// Truncated vectors Y_i. `n` overrides levels.n for oracle studies; by default the two
/// must match the sample size.
TruncatedSample truncate(const SampleMatrix& sample, const TruncationLevels& levels,
                         std::optional<std::size_t> n = std::nullopt);
TruncatedSample truncate(const Eigen::MatrixXd& x, const TruncationLevels& levels,
                         std::size_t n);

/// X_ij / (a_j sqrt(n)) with no indicator. Bit-identical to the truncated Y wherever the
/// indicator keeps the entry.
Eigen::MatrixXd scale_by_levels(const Eigen::MatrixXd& x, const TruncationLevels& levels,
                                std::size_t n);

TruncatedMomentReport moment_report(const SampleMatrix& sample, const TruncationLevels& levels,
                                    std::size_t n);
TruncatedMomentReport moment_report(const DistributionSpec& dist, const TruncationLevels& levels,
                                    std::size_t n);

}  // namespace snclt
