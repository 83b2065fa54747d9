#pragma once

#include "snclt/sampling.hpp"
#include "snclt/truncation.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

namespace snclt {

struct SelfNormalizedStat {
    /// |sum_i X_ij| / sqrt(sum_i X_ij^2); 0 on degenerate coordinates.
    Eigen::VectorXd values;
    /// Max over non-degenerate coordinates.
    double max_value = 0.0;
    std::size_t argmax = 0;
    /// Coordinates with zero denominator.
    std::vector<bool> degenerate_mask;

    std::size_t degenerate_count() const;
};

/// Throws DegeneracyError when every coordinate is degenerate.
SelfNormalizedStat self_normalized(const Eigen::Ref<const Eigen::MatrixXd>& x);
SelfNormalizedStat self_normalized(const SampleMatrix& sample);

struct EtaVector {
    /// eta_j = sum_i Y_ij^2 - 1.
    Eigen::VectorXd eta;
    /// |1 + eta_j| in [1/4, 7/4].
    std::vector<bool> in_band;

    bool all_in_band() const;
};

EtaVector eta(const Eigen::Ref<const Eigen::MatrixXd>& y);
EtaVector eta(const TruncatedSample& trunc);

struct GValue {
    double g = 0.0;
    double d1 = 0.0;
    double d2 = 0.0;
};

/// Smooth surrogate for x -> |x|^{-1/2}, written as g(x) = m(x)^{-1/2} with an even
/// argument clamp m.
///
/// m(x) = |x| on [1/4, 7/4]. Below the band m is held at 1/4, which keeps g <= 2 but
/// leaves a corner at |x| = 1/4 (g' jumps from 0 to -4 there). Above the band m rises to
/// 15/8 through a degree-9 smoothstep on [7/4, 15/8], which joins with four continuous
/// derivatives on both sides.
struct SmootherG {
    static constexpr double transition_lo_begin = 3.0 / 16.0;
    static constexpr double transition_lo_end = 0.25;
    static constexpr double transition_hi_begin = 1.75;
    static constexpr double transition_hi_end = 1.875;
    static constexpr double clamp_lo = 0.25;
    static constexpr double clamp_hi = 1.875;

    /// m and its first two derivatives with respect to x.
    static GValue clamp(double x);
    static GValue eval(double x);
    GValue operator()(double x) const { return eval(x); }
};

GValue g_eval(double x);

struct TiltedSum {
    /// sum_i Y_ij * g(1 + eta_j).
    Eigen::VectorXd y_tilde_sum;
    double max_value = 0.0;
};

TiltedSum tilted_sum(const Eigen::Ref<const Eigen::MatrixXd>& y);
TiltedSum tilted_sum(const TruncatedSample& trunc);

struct UstatDiagnostics {
    /// max_j |sum_{i1 != i2} Y_{i1 j} (Y_{i2 j}^2 - 1/n)|
    double u_max = 0.0;
    /// max_j |sum_i Y_ij|
    double s1 = 0.0;
    /// max_j |sum_i Y_ij^2 - 1|
    double s2 = 0.0;
    /// max_j |sum_i (Y_ij^3 - Y_ij / n)|
    double s3 = 0.0;
};

/// O(n d). Maxima run over coordinates whose Y column is not identically zero.
/// Throws ConfigError when n < 2.
UstatDiagnostics ustat_diagnostics(const Eigen::Ref<const Eigen::MatrixXd>& y);
UstatDiagnostics ustat_diagnostics(const TruncatedSample& trunc);

}  // namespace snclt
