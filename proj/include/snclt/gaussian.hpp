#pragma once

#include "snclt/sampling.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <vector>

namespace snclt {

struct GaussianSpec {
    Eigen::MatrixXd omega;
    /// Lower-triangular, L L^T = omega. Columns of a singular omega may be zero.
    Eigen::MatrixXd factor;
    /// Smallest eigenvalue, clipped at 0.
    double lambda_min = 0.0;
    bool unit_diagonal = false;

    std::size_t d() const noexcept { return static_cast<std::size_t>(omega.rows()); }
};

/// Validates a symmetric PSD matrix and factors it. Eigenvalues below -1e-10 (relative to
/// the largest diagonal entry) are rejected with DegeneracyError unless `repair` is set,
/// in which case they are clipped at 0 and the matrix is rebuilt.
GaussianSpec make_gaussian_spec(const Eigen::MatrixXd& omega, bool repair = false);

/// Eigenvalue clipping at 0; with `unit_diagonal` the result is rescaled back to a
/// correlation matrix.
Eigen::MatrixXd psd_repair(const Eigen::MatrixXd& omega, bool unit_diagonal);

/// Empirical correlation matrix of the columns, PSD-repaired. Diagonal is exactly 1.
GaussianSpec correlation_from_sample(const Eigen::Ref<const Eigen::MatrixXd>& x);
GaussianSpec correlation_from_sample(const SampleMatrix& sample);

/// `factor` times the empirical covariance of the columns (divisor rows - 1), PSD-repaired
/// without rescaling the diagonal.
GaussianSpec covariance_from_sample(const Eigen::Ref<const Eigen::MatrixXd>& y, double factor);

/// M draws of ||L W||_inf. Draw k uses the sub-stream derive_seed(seed, {k}).
std::vector<double> sample_max(const GaussianSpec& spec, std::size_t draws, std::uint64_t seed,
                               std::size_t workers = 1);

double normal_cdf(double x);
double normal_sf(double x);
double normal_quantile(double p);

/// P(||Z||_inf <= t) for Z ~ N(0, I_d).
double max_cdf_diag(double t, std::size_t d);

/// Gaussian-smoothed indicator of the sup-norm ball, in product form.
double smoothed_indicator(const Eigen::Ref<const Eigen::VectorXd>& x, double eps, double t);

/// max_{j,k} |A_jk - B_jk|.
double discrepancy(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);
double discrepancy(const GaussianSpec& a, const GaussianSpec& b);

/// eps (sqrt(2 log d) + 2) / sigma_min.
double nazarov_band_bound(double eps, std::size_t d, double sigma_min);

/// t with (2 Phi(t) - 1)^d = 1 - alpha.
double sidak_threshold(double alpha, std::size_t d);

struct MaxDistEstimate {
    std::size_t draws = 0;
    std::vector<double> grid;
    std::vector<double> cdf;
    std::vector<double> se;
};

/// Empirical CDF of `draws` on the sorted `grid`.
MaxDistEstimate estimate_max_cdf(std::vector<double> draws, std::vector<double> grid);

}  // namespace snclt
