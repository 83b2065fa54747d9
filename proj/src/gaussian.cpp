#include "snclt/gaussian.hpp"

#include "detail/parallel.hpp"
#include "snclt/error.hpp"
#include "snclt/rng.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

namespace snclt {

namespace {

constexpr double kPsdTolerance = 1e-10;

double max_abs_diag(const Eigen::MatrixXd& a) {
    return a.rows() == 0 ? 0.0 : a.diagonal().cwiseAbs().maxCoeff();
}

// Cholesky that tolerates a singular PSD matrix: a pivot at or below `tol` yields a zero
// column instead of failing.
Eigen::MatrixXd semidefinite_cholesky(const Eigen::MatrixXd& a, double tol) {
    const auto d = a.rows();
    Eigen::MatrixXd l = Eigen::MatrixXd::Zero(d, d);
    for (Eigen::Index j = 0; j < d; ++j) {
        double pivot = a(j, j);
        for (Eigen::Index k = 0; k < j; ++k) pivot -= l(j, k) * l(j, k);
        if (pivot <= tol) continue;
        const double root = std::sqrt(pivot);
        l(j, j) = root;
        for (Eigen::Index i = j + 1; i < d; ++i) {
            double v = a(i, j);
            for (Eigen::Index k = 0; k < j; ++k) v -= l(i, k) * l(j, k);
            l(i, j) = v / root;
        }
    }
    return l;
}

}  // namespace

Eigen::MatrixXd psd_repair(const Eigen::MatrixXd& omega, bool unit_diagonal) {
    const Eigen::MatrixXd sym = 0.5 * (omega + omega.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
    if (eig.info() != Eigen::Success) throw DegeneracyError("eigendecomposition failed");
    const Eigen::VectorXd clipped = eig.eigenvalues().cwiseMax(0.0);
    Eigen::MatrixXd out = eig.eigenvectors() * clipped.asDiagonal() * eig.eigenvectors().transpose();
    out = 0.5 * (out + out.transpose());
    if (unit_diagonal) {
        const Eigen::VectorXd diag = out.diagonal();
        if ((diag.array() <= 0.0).any())
            throw DegeneracyError("PSD repair produced a zero diagonal entry");
        const Eigen::VectorXd inv = diag.cwiseSqrt().cwiseInverse();
        out = inv.asDiagonal() * out * inv.asDiagonal();
        out.diagonal().setOnes();
    }
    return out;
}

GaussianSpec make_gaussian_spec(const Eigen::MatrixXd& omega, bool repair) {
    if (omega.rows() != omega.cols() || omega.rows() == 0)
        throw ConfigError("Gaussian covariance must be a non-empty square matrix");
    if (!omega.allFinite()) throw ConfigError("Gaussian covariance has non-finite entries");
    const double scale = std::max(max_abs_diag(omega), 1e-300);
    if ((omega - omega.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
        throw ConfigError("Gaussian covariance is not symmetric");

    GaussianSpec spec;
    spec.omega = 0.5 * (omega + omega.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(spec.omega, Eigen::EigenvaluesOnly);
    double lmin = eig.eigenvalues().minCoeff();
    if (lmin < -kPsdTolerance * scale) {
        if (!repair) {
            std::ostringstream msg;
            msg << "covariance is not positive semidefinite (smallest eigenvalue " << lmin << ")";
            throw DegeneracyError(msg.str());
        }
        const bool unit = (spec.omega.diagonal().array() - 1.0).abs().maxCoeff() <= 1e-12;
        spec.omega = psd_repair(spec.omega, unit);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> again(spec.omega, Eigen::EigenvaluesOnly);
        lmin = again.eigenvalues().minCoeff();
    }
    spec.lambda_min = std::max(lmin, 0.0);
    spec.unit_diagonal = (spec.omega.diagonal().array() - 1.0).abs().maxCoeff() <= 1e-12;
    spec.factor = semidefinite_cholesky(spec.omega, 1e-14 * scale);
    const double residual =
        (spec.factor * spec.factor.transpose() - spec.omega).cwiseAbs().maxCoeff();
    if (residual > kPsdTolerance * std::max(scale, 1.0)) {
        std::ostringstream msg;
        msg << "covariance factorization residual " << residual << " exceeds tolerance";
        throw DegeneracyError(msg.str());
    }
    return spec;
}

GaussianSpec correlation_from_sample(const Eigen::Ref<const Eigen::MatrixXd>& x) {
    if (x.rows() < 2) throw ConfigError("correlation needs at least 2 observations");
    const Eigen::MatrixXd centered = x.rowwise() - x.colwise().mean();
    const Eigen::VectorXd ss = centered.colwise().squaredNorm().transpose();
    std::string bad;
    for (Eigen::Index j = 0; j < ss.size(); ++j)
        if (!(ss(j) > 0.0)) bad += (bad.empty() ? "" : ", ") + std::to_string(j);
    if (!bad.empty()) throw DegeneracyError("degenerate (constant) column(s): " + bad);
    const Eigen::VectorXd inv = ss.cwiseSqrt().cwiseInverse();
    Eigen::MatrixXd corr = inv.asDiagonal() * (centered.transpose() * centered) * inv.asDiagonal();
    corr = 0.5 * (corr + corr.transpose());
    corr.diagonal().setOnes();
    corr = corr.cwiseMax(-1.0).cwiseMin(1.0);
    return make_gaussian_spec(corr, true);
}

GaussianSpec correlation_from_sample(const SampleMatrix& sample) {
    return correlation_from_sample(sample.data);
}

GaussianSpec covariance_from_sample(const Eigen::Ref<const Eigen::MatrixXd>& y, double factor) {
    if (y.rows() < 2) throw ConfigError("covariance needs at least 2 observations");
    const Eigen::MatrixXd centered = y.rowwise() - y.colwise().mean();
    Eigen::MatrixXd cov =
        (factor / static_cast<double>(y.rows() - 1)) * (centered.transpose() * centered);
    cov = 0.5 * (cov + cov.transpose());
    if ((cov.diagonal().array() <= 0.0).any())
        throw DegeneracyError("covariance has a zero-variance coordinate");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < 0.0) cov = psd_repair(cov, false);
    return make_gaussian_spec(cov, true);
}

std::vector<double> sample_max(const GaussianSpec& spec, std::size_t draws, std::uint64_t seed,
                               std::size_t workers) {
    std::vector<double> out(draws);
    const auto d = static_cast<Eigen::Index>(spec.d());
    const bool diagonal = spec.factor.isDiagonal(0.0);
    detail::parallel_chunks(draws, workers, [&](std::size_t begin, std::size_t end) {
        Eigen::VectorXd w(d);
        Eigen::VectorXd z(d);
        for (std::size_t k = begin; k < end; ++k) {
            Engine engine(derive_seed(seed, {k}));
            std::normal_distribution<double> normal;
            for (Eigen::Index j = 0; j < d; ++j) w(j) = normal(engine);
            if (diagonal)
                z = spec.factor.diagonal().cwiseProduct(w);
            else
                z.noalias() = spec.factor.triangularView<Eigen::Lower>() * w;
            out[k] = z.cwiseAbs().maxCoeff();
        }
    });
    return out;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }
double normal_sf(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        if (p == 0.0) return -std::numeric_limits<double>::infinity();
        if (p == 1.0) return std::numeric_limits<double>::infinity();
        throw ConfigError("normal quantile requires p in [0, 1]");
    }
    return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

double max_cdf_diag(double t, std::size_t d) {
    if (d < 1) throw ConfigError("dimension d must be >= 1");
    if (!(t > 0.0)) return 0.0;
    if (std::isinf(t)) return 1.0;
    // 2 Phi(t) - 1 = 1 - erfc(t / sqrt 2)
    const double out = std::erfc(t / std::numbers::sqrt2);
    if (out >= 1.0) return 0.0;
    return std::exp(static_cast<double>(d) * std::log1p(-out));
}

double smoothed_indicator(const Eigen::Ref<const Eigen::VectorXd>& x, double eps, double t) {
    if (!(eps > 0.0)) throw ConfigError("smoothing bandwidth eps must be > 0");
    if (!(t > 0.0)) return 0.0;  // t <= 0: the ball is empty or a null set
    double log_prod = 0.0;
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        const double hi = (t - x(j)) / eps;
        const double lo = (-t - x(j)) / eps;
        // P(lo < W <= hi), taken from whichever tail keeps precision.
        const double p = lo > 0.0 ? normal_sf(lo) - normal_sf(hi) : normal_cdf(hi) - normal_cdf(lo);
        if (!(p > 0.0)) return 0.0;
        log_prod += std::log(p);
    }
    return std::min(std::exp(log_prod), 1.0);
}

double discrepancy(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw ConfigError("discrepancy: dimension mismatch (" + std::to_string(a.rows()) +
                          " vs " + std::to_string(b.rows()) + ")");
    if (a.size() == 0) return 0.0;
    return (a - b).cwiseAbs().maxCoeff();
}

double discrepancy(const GaussianSpec& a, const GaussianSpec& b) {
    return discrepancy(a.omega, b.omega);
}

double nazarov_band_bound(double eps, std::size_t d, double sigma_min) {
    if (eps < 0.0) throw ConfigError("band half-width must be >= 0");
    if (!(sigma_min > 0.0)) throw ConfigError("sigma_min must be > 0");
    if (d < 1) throw ConfigError("dimension d must be >= 1");
    return eps * (std::sqrt(2.0 * std::log(static_cast<double>(d))) + 2.0) / sigma_min;
}

double sidak_threshold(double alpha, std::size_t d) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must be in (0, 1)");
    if (d < 1) throw ConfigError("dimension d must be >= 1");
    // Upper-tail mass (1 - (1 - alpha)^{1/d}) / 2, formed without cancellation.
    const double q = -0.5 * std::expm1(std::log1p(-alpha) / static_cast<double>(d));
    return boost::math::quantile(
        boost::math::complement(boost::math::normal_distribution<double>(), q));
}

MaxDistEstimate estimate_max_cdf(std::vector<double> draws, std::vector<double> grid) {
    if (draws.empty()) throw ConfigError("no draws to estimate a CDF from");
    std::sort(draws.begin(), draws.end());
    std::sort(grid.begin(), grid.end());
    MaxDistEstimate out;
    out.draws = draws.size();
    const double m = static_cast<double>(draws.size());
    for (double t : grid) {
        const auto k = std::upper_bound(draws.begin(), draws.end(), t) - draws.begin();
        const double f = static_cast<double>(k) / m;
        out.grid.push_back(t);
        out.cdf.push_back(f);
        out.se.push_back(std::sqrt(f * (1.0 - f) / m));
    }
    return out;
}

}  // namespace snclt
