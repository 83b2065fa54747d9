#include "snclt/truncation.hpp"

#include "detail/quadrature.hpp"
#include "snclt/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace snclt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Also maps -0.0 to +0.0.
double positive_part(double x) { return x > 0.0 ? x : 0.0; }

/// Empirical law of a nonnegative variable V through its sorted squares.
/// psi(b) = (1/N) * sum of V^2 over V^2 <= b n, which only depends on how many sorted
/// squares pass the test, so repeated evaluations with the same count are bit-identical.
class EmpiricalSquares {
public:
    explicit EmpiricalSquares(std::vector<double> squares) : sq_(std::move(squares)) {
        std::sort(sq_.begin(), sq_.end());
        prefix_.resize(sq_.size() + 1, 0.0);
        for (std::size_t i = 0; i < sq_.size(); ++i) prefix_[i + 1] = prefix_[i] + sq_[i];
    }

    double psi(double b, std::size_t n) const {
        const double cut = b * static_cast<double>(n);
        const auto k = static_cast<std::size_t>(
            std::upper_bound(sq_.begin(), sq_.end(), cut) - sq_.begin());
        return prefix_[k] / static_cast<double>(sq_.size());
    }
    double mean() const { return prefix_.back() / static_cast<double>(sq_.size()); }

private:
    std::vector<double> sq_;
    std::vector<double> prefix_;
};

std::vector<Marginal> marginals(const DistributionSpec& dist) {
    std::vector<Marginal> out;
    out.reserve(dist.d);
    for (std::size_t j = 0; j < dist.d; ++j) out.push_back(coordinate_marginal(dist, j));
    return out;
}

std::vector<double> all_breakpoints(const std::vector<Marginal>& ms, double factor = 1.0) {
    std::vector<double> out;
    for (const auto& m : ms)
        for (double b : m.breakpoints()) out.push_back(b * factor);
    return out;
}

/// Law of M = max_j |X_j| for independent coordinates.
struct MaxLaw {
    const std::vector<Marginal>& ms;

    // P(M > m) = 1 - prod_j (1 - P(|X_j| > m)).
    double sf(double m) const {
        double log_cdf = 0.0;
        for (const auto& mj : ms) {
            const double s = mj.abs_sf(m);
            if (s >= 1.0) return 1.0;
            log_cdf += std::log1p(-s);
        }
        return positive_part(-std::expm1(log_cdf));
    }
    double sq_sf(double c2) const {
        double log_cdf = 0.0;
        for (const auto& mj : ms) {
            const double s = mj.sq_sf(c2);
            if (s >= 1.0) return 1.0;
            log_cdf += std::log1p(-s);
        }
        return positive_part(-std::expm1(log_cdf));
    }
    /// E[M^p 1{M^2 <= c2}] = int_0^c p m^{p-1} (P(M > m) - P(M^2 > c2)) dm.
    double truncated_moment(double p, double c2) const {
        if (!(c2 > 0.0)) return 0.0;
        const double tail = sq_sf(c2);
        return detail::integrate_piecewise(
            [&](double m) { return p * std::pow(m, p - 1.0) * std::max(sf(m) - tail, 0.0); },
            0.0, std::sqrt(c2), all_breakpoints(ms));
    }
    /// prod_{k != j} P(X_k^2 <= c2).
    double others_inside(std::size_t j, double c2) const {
        double prod = 1.0;
        for (std::size_t k = 0; k < ms.size(); ++k)
            if (k != j) prod *= 1.0 - ms[k].sq_sf(c2);
        return prod;
    }
};

// Upper bound on every fixed point of psi for a law with infinite second moment:
// grow b until psi(b) < b holds at b and at 64 further doublings.
double bracket_above(const std::function<double(double)>& psi, double start) {
    double b = start;
    for (int guard = 0; guard < 4096; ++guard) {
        while (psi(b) >= b) b *= 2.0;
        bool ok = true;
        double probe = b;
        for (int i = 0; i < 64; ++i) {
            probe *= 2.0;
            if (psi(probe) >= probe) {
                b = probe;
                ok = false;
                break;
            }
        }
        if (ok) return b;
    }
    throw DegeneracyError("could not bracket the truncation fixed point from above");
}

void check_level_inputs(std::size_t n) {
    if (n < 1) throw ConfigError("sample size n in the truncation equation must be >= 1");
}

}  // namespace

std::string_view to_string(TruncationMode m) {
    return m == TruncationMode::global ? "global" : "per_coordinate";
}

TruncationMode parse_truncation_mode(std::string_view s) {
    if (s == "per_coordinate") return TruncationMode::per_coordinate;
    if (s == "global") return TruncationMode::global;
    throw ConfigError("unknown truncation mode '" + std::string(s) + "'");
}

double TruncationLevels::level(std::size_t j) const { return std::sqrt(squared(j)); }

std::vector<double> TruncationLevels::levels() const {
    std::vector<double> out(level_sq.size());
    std::transform(level_sq.begin(), level_sq.end(), out.begin(),
                   [](double b) { return std::sqrt(b); });
    return out;
}

void to_json(nlohmann::json& j, const TruncatedMomentReport& r) {
    j = nlohmann::json{{"mu1", r.mu1},
                       {"mu3", r.mu3},
                       {"tail_prob", r.tail_prob},
                       {"r_n", r.r_n},
                       {"truncated_sq", r.truncated_sq},
                       {"doa_ratio", nullptr}};
    if (r.doa_ratio) j["doa_ratio"] = *r.doa_ratio;
}

void from_json(const nlohmann::json& j, TruncatedMomentReport& r) {
    j.at("mu1").get_to(r.mu1);
    j.at("mu3").get_to(r.mu3);
    j.at("tail_prob").get_to(r.tail_prob);
    j.at("r_n").get_to(r.r_n);
    j.at("truncated_sq").get_to(r.truncated_sq);
    if (j.at("doa_ratio").is_null())
        r.doa_ratio.reset();
    else
        r.doa_ratio = j.at("doa_ratio").get<double>();
}

void to_json(nlohmann::json& j, const TruncationLevels& l) {
    j = nlohmann::json{{"mode", to_string(l.mode)},
                       {"n", l.n},
                       {"levels", l.levels()},
                       {"levels_squared", l.level_sq},
                       {"iterations", l.iterations}};
}

double truncated_second_moment(const SampleMatrix& sample, std::size_t j, double b, std::size_t n) {
    check_level_inputs(n);
    if (b < 0.0) throw ConfigError("truncation level b must be >= 0");
    if (j >= sample.d()) throw ConfigError("coordinate index out of range");
    const double cut = b * static_cast<double>(n);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < sample.data.rows(); ++i) {
        const double x2 = sample.data(i, static_cast<Eigen::Index>(j)) *
                          sample.data(i, static_cast<Eigen::Index>(j));
        if (x2 <= cut) acc += x2;
    }
    return acc / static_cast<double>(sample.n());
}

double truncated_second_moment(const DistributionSpec& dist, std::size_t j, double b, std::size_t n) {
    check_level_inputs(n);
    if (b < 0.0) throw ConfigError("truncation level b must be >= 0");
    if (j >= dist.d) throw ConfigError("coordinate index out of range");
    return coordinate_marginal(dist, j).partial_moment(2.0, -1.0, b * static_cast<double>(n));
}

FixedPointResult largest_fixed_point(const std::function<double(double)>& psi, double upper,
                                     bool exact, const FixedPointOptions& options) {
    FixedPointResult out;
    double b = psi(upper);
    out.iterates.push_back(b);
    for (std::size_t it = 1; it <= options.max_iter; ++it) {
        const double next = psi(b);
        out.iterates.push_back(next);
        out.iterations = it;
        const bool done = exact ? next == b : std::abs(next - b) <= options.rel_tol * b;
        b = next;
        if (done || b == 0.0) {
            out.value = b;
            return out;
        }
    }
    std::ostringstream msg;
    msg << "truncation fixed point did not converge after " << options.max_iter
        << " iterations (residual " << std::abs(psi(b) - b) << ")";
    throw DegeneracyError(msg.str());
}

TruncationLevels solve_levels(const SampleMatrix& sample, std::size_t n, TruncationMode mode) {
    check_level_inputs(n);
    TruncationLevels out;
    out.mode = mode;
    out.n = n;
    const auto rows = sample.data.rows();

    auto solve = [&](std::vector<double> squares) {
        const EmpiricalSquares law(std::move(squares));
        // Every non-final step drops at least one sorted square, so N + 1 steps suffice.
        FixedPointOptions exact;
        exact.max_iter = static_cast<std::size_t>(rows) + 2;
        const auto result = largest_fixed_point([&](double b) { return law.psi(b, n); },
                                                law.mean(), true, exact);
        out.iterations = std::max(out.iterations, result.iterations);
        return result.value;
    };

    if (mode == TruncationMode::per_coordinate) {
        std::vector<std::size_t> degenerate;
        for (Eigen::Index j = 0; j < sample.data.cols(); ++j)
            if ((sample.data.col(j).array() == 0.0).all())
                degenerate.push_back(static_cast<std::size_t>(j));
        if (!degenerate.empty()) {
            std::string list;
            for (auto j : degenerate) list += (list.empty() ? "" : ", ") + std::to_string(j);
            throw DegeneracyError("degenerate (all-zero) coordinate(s): " + list);
        }
        for (Eigen::Index j = 0; j < sample.data.cols(); ++j) {
            std::vector<double> sq(static_cast<std::size_t>(rows));
            for (Eigen::Index i = 0; i < rows; ++i) sq[i] = sample.data(i, j) * sample.data(i, j);
            out.level_sq.push_back(solve(std::move(sq)));
        }
    } else {
        std::vector<double> sq(static_cast<std::size_t>(rows));
        for (Eigen::Index i = 0; i < rows; ++i) sq[i] = sample.data.row(i).array().square().maxCoeff();
        if (std::all_of(sq.begin(), sq.end(), [](double v) { return v == 0.0; }))
            throw DegeneracyError("degenerate sample: sup-norm is identically zero");
        out.level_sq.push_back(solve(std::move(sq)));
    }
    return out;
}

TruncationLevels solve_levels(const DistributionSpec& dist, std::size_t n, TruncationMode mode,
                              const FixedPointOptions& options) {
    check_level_inputs(n);
    const auto ms = marginals(dist);
    const double nn = static_cast<double>(n);
    TruncationLevels out;
    out.mode = mode;
    out.n = n;

    auto solve = [&](const std::function<double(double)>& psi, double second_moment,
                     double scale_sq) {
        const double upper =
            std::isfinite(second_moment) ? second_moment : bracket_above(psi, scale_sq);
        const auto result = largest_fixed_point(psi, upper, false, options);
        out.iterations = std::max(out.iterations, result.iterations);
        return result.value;
    };

    if (mode == TruncationMode::per_coordinate) {
        for (std::size_t j = 0; j < dist.d; ++j) {
            const Marginal& m = ms[j];
            const double s = dist.scale_of(j);
            out.level_sq.push_back(
                solve([&](double b) { return m.partial_moment(2.0, -1.0, b * nn); },
                      m.second_moment(), s * s));
        }
    } else {
        const MaxLaw law{ms};
        double total = 0.0;
        double max_scale = 0.0;
        for (std::size_t j = 0; j < dist.d; ++j) {
            total += ms[j].second_moment();
            max_scale = std::max(max_scale, dist.scale_of(j));
        }
        // E[max_j X_j^2] <= sum_j E[X_j^2] bounds every fixed point.
        out.level_sq.push_back(solve([&](double b) { return law.truncated_moment(2.0, b * nn); },
                                     total, max_scale * max_scale));
    }
    return out;
}

TruncatedSample truncate(const Eigen::MatrixXd& x, const TruncationLevels& levels, std::size_t n) {
    const auto rows = x.rows();
    const auto cols = x.cols();
    if (levels.mode == TruncationMode::per_coordinate &&
        levels.level_sq.size() != static_cast<std::size_t>(cols))
        throw ConfigError("truncation levels have dimension " +
                          std::to_string(levels.level_sq.size()) + " but sample has " +
                          std::to_string(cols) + " columns");
    if (levels.mode == TruncationMode::global && levels.level_sq.size() != 1)
        throw ConfigError("global truncation requires exactly one level");

    const double nn = static_cast<double>(n);
    const double root_n = std::sqrt(nn);
    TruncatedSample out;
    out.levels = levels;
    out.y.resize(rows, cols);
    out.truncated.resize(rows, cols);

    if (levels.mode == TruncationMode::per_coordinate) {
        for (Eigen::Index j = 0; j < cols; ++j) {
            const double b = levels.level_sq[static_cast<std::size_t>(j)];
            const double cut = b * nn;
            const double denom = std::sqrt(b) * root_n;
            for (Eigen::Index i = 0; i < rows; ++i) {
                const double v = x(i, j);
                const bool kill = !(v * v <= cut);
                out.truncated(i, j) = kill;
                out.y(i, j) = kill ? 0.0 : v / denom;
            }
        }
    } else {
        const double b = levels.level_sq.front();
        const double cut = b * nn;
        const double denom = std::sqrt(b) * root_n;
        for (Eigen::Index i = 0; i < rows; ++i) {
            const bool kill = !(x.row(i).array().square().maxCoeff() <= cut);
            for (Eigen::Index j = 0; j < cols; ++j) {
                out.truncated(i, j) = kill;
                out.y(i, j) = kill ? 0.0 : x(i, j) / denom;
            }
        }
    }
    return out;
}

Eigen::MatrixXd scale_by_levels(const Eigen::MatrixXd& x, const TruncationLevels& levels,
                                std::size_t n) {
    if (levels.mode == TruncationMode::per_coordinate &&
        levels.level_sq.size() != static_cast<std::size_t>(x.cols()))
        throw ConfigError("truncation levels do not match the sample dimension");
    const double root_n = std::sqrt(static_cast<double>(n));
    Eigen::MatrixXd out(x.rows(), x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        const double denom = std::sqrt(levels.squared(static_cast<std::size_t>(j))) * root_n;
        for (Eigen::Index i = 0; i < x.rows(); ++i) out(i, j) = x(i, j) / denom;
    }
    return out;
}

TruncatedSample truncate(const SampleMatrix& sample, const TruncationLevels& levels,
                         std::optional<std::size_t> n) {
    const std::size_t used = n.value_or(levels.n);
    if (!n && levels.n != sample.n())
        throw ConfigError("levels were solved for n=" + std::to_string(levels.n) +
                          " but the sample has " + std::to_string(sample.n()) +
                          " rows; pass n explicitly to override");
    return truncate(sample.data, levels, used);
}

TruncatedMomentReport moment_report(const SampleMatrix& sample, const TruncationLevels& levels,
                                    std::size_t n) {
    check_level_inputs(n);
    const TruncatedSample t = truncate(sample.data, levels, n);
    const auto rows = t.y.rows();
    const auto cols = t.y.cols();
    const double nn = static_cast<double>(n);
    const double inv_rows = 1.0 / static_cast<double>(rows);

    TruncatedMomentReport r;
    double max_abs_mean = 0.0;
    double max_tail_sq = 0.0;
    r.truncated_sq.resize(static_cast<std::size_t>(cols));
    for (Eigen::Index j = 0; j < cols; ++j) {
        max_abs_mean = std::max(max_abs_mean, std::abs(t.y.col(j).sum() * inv_rows));
        r.truncated_sq[static_cast<std::size_t>(j)] = t.y.col(j).squaredNorm() * inv_rows;
        const double b = levels.squared(static_cast<std::size_t>(j));
        double tail = 0.0;
        for (Eigen::Index i = 0; i < rows; ++i)
            if (t.truncated(i, j)) tail += sample.data(i, j) * sample.data(i, j) / b;
        max_tail_sq = std::max(max_tail_sq, tail * inv_rows);
    }
    double cube = 0.0;
    Eigen::Index killed_rows = 0;
    for (Eigen::Index i = 0; i < rows; ++i) {
        const double m = t.y.row(i).cwiseAbs().maxCoeff();
        cube += m * m * m;
        if (t.truncated.row(i).any()) ++killed_rows;
    }
    r.mu1 = nn * max_abs_mean;
    r.mu3 = nn * cube * inv_rows;
    r.tail_prob = nn * static_cast<double>(killed_rows) * inv_rows;
    r.r_n = max_tail_sq + r.mu1 * r.mu1;
    if (levels.mode == TruncationMode::global) {
        const double tau2 = levels.level_sq.front() * nn;
        double inside = 0.0;
        Eigen::Index outside = 0;
        for (Eigen::Index i = 0; i < rows; ++i) {
            const double m2 = sample.data.row(i).array().square().maxCoeff();
            if (m2 <= tau2)
                inside += m2;
            else
                ++outside;
        }
        r.doa_ratio = tau2 * static_cast<double>(outside) / inside;
    }
    return r;
}

TruncatedMomentReport moment_report(const DistributionSpec& dist, const TruncationLevels& levels,
                                    std::size_t n) {
    check_level_inputs(n);
    const auto ms = marginals(dist);
    if (levels.mode == TruncationMode::per_coordinate && levels.level_sq.size() != dist.d)
        throw ConfigError("truncation levels do not match the distribution dimension");
    const double nn = static_cast<double>(n);
    const double root_n = std::sqrt(nn);
    const std::size_t d = dist.d;
    TruncatedMomentReport r;
    r.truncated_sq.resize(d);

    if (levels.mode == TruncationMode::per_coordinate) {
        double max_abs_mean = 0.0;
        double max_tail_sq = 0.0;
        double log_inside = 0.0;
        std::vector<double> cutoff(d);
        for (std::size_t j = 0; j < d; ++j) {
            const double b = levels.level_sq[j];
            const double c2 = b * nn;
            cutoff[j] = std::sqrt(c2);
            max_abs_mean = std::max(
                max_abs_mean, std::abs(ms[j].signed_partial_mean(-1.0, c2)) / (std::sqrt(b) * root_n));
            r.truncated_sq[j] = ms[j].partial_moment(2.0, -1.0, c2) / c2;
            max_tail_sq = std::max(max_tail_sq, ms[j].partial_moment(2.0, c2, kInf) / b);
            log_inside += std::log1p(-std::min(ms[j].sq_sf(c2), 1.0));
        }
        r.mu1 = nn * max_abs_mean;
        r.tail_prob = positive_part(nn * -std::expm1(log_inside));
        r.r_n = max_tail_sq + r.mu1 * r.mu1;

        // E[max_j |Y_j|^3] = int_0^1 3 y^2 P(max_j |Y_j| > y) dy, where
        // P(|Y_j| > y) = P(y c_j < |X_j|) - P(X_j^2 > c_j^2) for y < 1.
        std::vector<double> tails(d);
        for (std::size_t j = 0; j < d; ++j) tails[j] = ms[j].sq_sf(cutoff[j] * cutoff[j]);
        const auto exceed = [&](double y) {
            double log_cdf = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                const double p = std::max(ms[j].abs_sf(y * cutoff[j]) - tails[j], 0.0);
                if (p >= 1.0) return 1.0;
                log_cdf += std::log1p(-p);
            }
            return -std::expm1(log_cdf);
        };
        std::vector<double> breaks;
        for (std::size_t j = 0; j < d; ++j)
            for (double b : ms[j].breakpoints()) breaks.push_back(b / cutoff[j]);
        r.mu3 = nn * detail::integrate_piecewise(
                         [&](double y) { return 3.0 * y * y * exceed(y); }, 0.0, 1.0, breaks);
    } else {
        const MaxLaw law{ms};
        const double b = levels.level_sq.front();
        const double c2 = b * nn;
        const double denom = std::sqrt(b) * root_n;
        double max_abs_mean = 0.0;
        double max_tail_sq = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            const double others = law.others_inside(j, c2);
            max_abs_mean =
                std::max(max_abs_mean, std::abs(ms[j].signed_partial_mean(-1.0, c2)) * others / denom);
            const double body = ms[j].partial_moment(2.0, -1.0, c2);
            r.truncated_sq[j] = body * others / c2;
            // E[X_j^2 1{M^2 > c2}] = E[X_j^2 1{X_j^2 > c2}] + E[X_j^2 1{X_j^2 <= c2}] P(some other exceeds).
            const double tail = ms[j].partial_moment(2.0, c2, kInf) + body * (1.0 - others);
            max_tail_sq = std::max(max_tail_sq, tail / b);
        }
        const double outside = law.sq_sf(c2);
        r.mu1 = nn * max_abs_mean;
        r.tail_prob = nn * outside;
        r.r_n = max_tail_sq + r.mu1 * r.mu1;
        r.mu3 = nn * law.truncated_moment(3.0, c2) / (denom * denom * denom);
        r.doa_ratio = c2 * outside / law.truncated_moment(2.0, c2);
    }
    return r;
}

}  // namespace snclt
