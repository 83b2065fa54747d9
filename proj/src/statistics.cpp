#include "snclt/statistics.hpp"

#include "snclt/error.hpp"

#include <algorithm>
#include <cmath>

namespace snclt {

std::size_t SelfNormalizedStat::degenerate_count() const {
    return static_cast<std::size_t>(std::count(degenerate_mask.begin(), degenerate_mask.end(), true));
}

SelfNormalizedStat self_normalized(const Eigen::Ref<const Eigen::MatrixXd>& x) {
    if (x.rows() < 1) throw ConfigError("self-normalized sum needs at least one observation");
    const auto d = x.cols();
    SelfNormalizedStat out;
    out.values = Eigen::VectorXd::Zero(d);
    out.degenerate_mask.assign(static_cast<std::size_t>(d), false);
    bool any = false;
    for (Eigen::Index j = 0; j < d; ++j) {
        const double den = x.col(j).squaredNorm();
        if (!(den > 0.0)) {
            out.degenerate_mask[static_cast<std::size_t>(j)] = true;
            continue;
        }
        const double v = std::abs(x.col(j).sum()) / std::sqrt(den);
        out.values(j) = v;
        if (!any || v > out.max_value) {
            out.max_value = v;
            out.argmax = static_cast<std::size_t>(j);
        }
        any = true;
    }
    if (!any) throw DegeneracyError("self-normalized sum: every coordinate has zero denominator");
    return out;
}

SelfNormalizedStat self_normalized(const SampleMatrix& sample) { return self_normalized(sample.data); }

bool EtaVector::all_in_band() const {
    return std::all_of(in_band.begin(), in_band.end(), [](bool b) { return b; });
}

EtaVector eta(const Eigen::Ref<const Eigen::MatrixXd>& y) {
    EtaVector out;
    out.eta.resize(y.cols());
    out.in_band.resize(static_cast<std::size_t>(y.cols()));
    for (Eigen::Index j = 0; j < y.cols(); ++j) {
        const double s = y.col(j).squaredNorm();
        out.eta(j) = s - 1.0;
        out.in_band[static_cast<std::size_t>(j)] = s >= 0.25 && s <= 1.75;
    }
    return out;
}

EtaVector eta(const TruncatedSample& trunc) { return eta(trunc.y); }

namespace {

// Degree-9 smoothstep: S(0) = 0, S(1) = 1, derivatives 1..4 vanish at both ends.
double step(double t) {
    return t * t * t * t * t * (126.0 + t * (-420.0 + t * (540.0 + t * (-315.0 + t * 70.0))));
}
double step_d1(double t) {
    const double a = t * (1.0 - t);
    return 630.0 * a * a * a * a;
}
double step_d2(double t) {
    const double a = t * (1.0 - t);
    return 2520.0 * a * a * a * (1.0 - 2.0 * t);
}

}  // namespace

GValue SmootherG::clamp(double x) {
    const double u = std::abs(x);
    const double sign = x < 0.0 ? -1.0 : 1.0;
    if (u < transition_lo_end) return {clamp_lo, 0.0, 0.0};
    if (u <= transition_hi_begin) return {u, sign, 0.0};
    if (u >= transition_hi_end) return {clamp_hi, 0.0, 0.0};
    const double width = transition_hi_end - transition_hi_begin;
    const double t = (u - transition_hi_begin) / width;
    const double w = transition_hi_end - u;
    const double s = step(t);
    const double s1 = step_d1(t) / width;
    const double s2 = step_d2(t) / (width * width);
    return {u + s * w, sign * (1.0 - s + s1 * w), s2 * w - 2.0 * s1};
}

GValue SmootherG::eval(double x) {
    const GValue m = clamp(x);
    const double r = 1.0 / std::sqrt(m.g);
    const double r3 = r / m.g;
    const double r5 = r3 / m.g;
    return {r, -0.5 * r3 * m.d1, 0.75 * r5 * m.d1 * m.d1 - 0.5 * r3 * m.d2};
}

GValue g_eval(double x) { return SmootherG::eval(x); }

TiltedSum tilted_sum(const Eigen::Ref<const Eigen::MatrixXd>& y) {
    TiltedSum out;
    out.y_tilde_sum.resize(y.cols());
    for (Eigen::Index j = 0; j < y.cols(); ++j) {
        const double s = y.col(j).squaredNorm();
        out.y_tilde_sum(j) = y.col(j).sum() * g_eval(s).g;
    }
    out.max_value = y.cols() > 0 ? out.y_tilde_sum.cwiseAbs().maxCoeff() : 0.0;
    return out;
}

TiltedSum tilted_sum(const TruncatedSample& trunc) { return tilted_sum(trunc.y); }

UstatDiagnostics ustat_diagnostics(const Eigen::Ref<const Eigen::MatrixXd>& y) {
    const auto n = y.rows();
    if (n < 2) throw ConfigError("U-statistic diagnostics require n >= 2");
    const double inv_n = 1.0 / static_cast<double>(n);
    UstatDiagnostics out;
    for (Eigen::Index j = 0; j < y.cols(); ++j) {
        const auto a = y.col(j).array();
        const double sq = a.square().sum();
        if (!(sq > 0.0)) continue;
        const Eigen::ArrayXd b = a.square() - inv_n;
        // sum_{i1 != i2} A_{i1} B_{i2} = (sum A)(sum B) - sum A B
        const double sum_a = a.sum();
        const double u = sum_a * b.sum() - (a * b).sum();
        out.u_max = std::max(out.u_max, std::abs(u));
        out.s1 = std::max(out.s1, std::abs(sum_a));
        out.s2 = std::max(out.s2, std::abs(sq - 1.0));
        out.s3 = std::max(out.s3, std::abs((a.cube() - a * inv_n).sum()));
    }
    return out;
}

UstatDiagnostics ustat_diagnostics(const TruncatedSample& trunc) { return ustat_diagnostics(trunc.y); }

}  // namespace snclt
