#include "snclt/sampling.hpp"

#include "detail/format.hpp"
#include "detail/quadrature.hpp"
#include "snclt/error.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

namespace snclt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

std::string_view to_string(Family f) {
    switch (f) {
        case Family::gaussian: return "gaussian";
        case Family::student_t: return "student_t";
        case Family::symmetric_pareto: return "symmetric_pareto";
        case Family::rademacher: return "rademacher";
    }
    return "?";
}

std::string_view to_string(CovarianceKind k) {
    switch (k) {
        case CovarianceKind::identity: return "identity";
        case CovarianceKind::equicorrelated: return "equicorrelated";
        case CovarianceKind::ar1: return "ar1";
    }
    return "?";
}

Family parse_family(std::string_view s) {
    if (s == "gaussian") return Family::gaussian;
    if (s == "student_t") return Family::student_t;
    if (s == "symmetric_pareto") return Family::symmetric_pareto;
    if (s == "rademacher") return Family::rademacher;
    throw ConfigError("unknown distribution family '" + std::string(s) + "'");
}

CovarianceKind parse_covariance_kind(std::string_view s) {
    if (s == "identity") return CovarianceKind::identity;
    if (s == "equicorrelated") return CovarianceKind::equicorrelated;
    if (s == "ar1") return CovarianceKind::ar1;
    throw ConfigError("unknown covariance kind '" + std::string(s) + "'");
}

TableFormat parse_table_format(std::string_view s) {
    if (s == "csv") return TableFormat::csv;
    if (s == "tsv") return TableFormat::tsv;
    throw ConfigError("unknown table format '" + std::string(s) + "'");
}

void CovarianceSpec::validate() const {
    if (d < 1) throw ConfigError("covariance dimension must be >= 1");
    switch (kind) {
        case CovarianceKind::identity: return;
        case CovarianceKind::equicorrelated: {
            const double lower = d > 1 ? -1.0 / static_cast<double>(d - 1) : -1.0;
            if (!(rho > lower && rho < 1.0))
                throw ConfigError("equicorrelated rho=" + detail::format_double(rho) +
                                  " outside (" + detail::format_double(lower) +
                                  ", 1): matrix would not be positive definite");
            return;
        }
        case CovarianceKind::ar1:
            if (!(std::abs(rho) < 1.0))
                throw ConfigError("ar1 rho=" + detail::format_double(rho) +
                                  " must satisfy |rho| < 1");
            return;
    }
}

bool CovarianceSpec::is_identity() const noexcept {
    return kind == CovarianceKind::identity || d == 1 || rho == 0.0;
}

void DistributionSpec::validate() const {
    if (d < 1) throw ConfigError("dimension d must be >= 1");
    if (covariance.d != d)
        throw ConfigError("covariance dimension " + std::to_string(covariance.d) +
                          " does not match d=" + std::to_string(d));
    covariance.validate();
    if ((family == Family::student_t || family == Family::symmetric_pareto) &&
        !(shape > 0.0 && std::isfinite(shape)))
        throw ConfigError(std::string(to_string(family)) + " requires a positive shape parameter");
    if (!scale.empty()) {
        if (scale.size() != d)
            throw ConfigError("scale vector has length " + std::to_string(scale.size()) +
                              ", expected " + std::to_string(d));
        for (double s : scale)
            if (!(s > 0.0 && std::isfinite(s))) throw ConfigError("scales must be positive");
    }
}

Eigen::MatrixXd build_covariance(const CovarianceSpec& spec) {
    spec.validate();
    const auto d = static_cast<Eigen::Index>(spec.d);
    Eigen::MatrixXd sigma = Eigen::MatrixXd::Identity(d, d);
    for (Eigen::Index j = 0; j < d; ++j) {
        for (Eigen::Index k = 0; k < d; ++k) {
            if (j == k) continue;
            switch (spec.kind) {
                case CovarianceKind::identity: break;
                case CovarianceKind::equicorrelated: sigma(j, k) = spec.rho; break;
                case CovarianceKind::ar1:
                    sigma(j, k) = std::pow(spec.rho, static_cast<double>(std::abs(j - k)));
                    break;
            }
        }
    }
    return sigma;
}

Eigen::MatrixXd covariance_factor(const CovarianceSpec& spec) {
    const Eigen::MatrixXd sigma = build_covariance(spec);
    Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success)
        throw DegeneracyError("covariance factorization failed (matrix is not positive definite)");
    return llt.matrixL();
}

void fill_rows(const DistributionSpec& dist, const Eigen::MatrixXd& factor, Engine& engine,
               Eigen::Ref<Eigen::MatrixXd> rows) {
    const Eigen::Index n = rows.rows();
    const Eigen::Index d = rows.cols();
    Eigen::VectorXd xi(d);

    std::normal_distribution<double> normal;
    std::student_t_distribution<double> student(dist.family == Family::student_t ? dist.shape
                                                                                 : 1.0);
    std::uniform_real_distribution<double> uniform;
    std::bernoulli_distribution coin;

    const double t_unit = dist.shape > 2.0 ? std::sqrt((dist.shape - 2.0) / dist.shape) : 1.0;
    const double pareto_x0 =
        dist.shape > 2.0 ? std::sqrt((dist.shape - 2.0) / dist.shape) : 1.0;
    const bool mix = factor.size() != 0;

    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) {
            switch (dist.family) {
                case Family::gaussian: xi[j] = normal(engine); break;
                case Family::student_t: xi[j] = t_unit * student(engine); break;
                case Family::symmetric_pareto: {
                    const double u = 1.0 - uniform(engine);  // (0, 1]
                    const double mag = pareto_x0 * std::pow(u, -1.0 / dist.shape);
                    xi[j] = coin(engine) ? mag : -mag;
                    break;
                }
                case Family::rademacher: xi[j] = coin(engine) ? 1.0 : -1.0; break;
            }
        }
        if (mix) {
            rows.row(i) = (factor.triangularView<Eigen::Lower>() * xi).transpose();
        } else {
            rows.row(i) = xi.transpose();
        }
        if (!dist.scale.empty())
            for (Eigen::Index j = 0; j < d; ++j) rows(i, j) *= dist.scale[static_cast<std::size_t>(j)];
    }
}

SampleMatrix generate_sample(const DistributionSpec& dist, std::size_t n, std::uint64_t seed) {
    dist.validate();
    if (n < 2) throw ConfigError("sample size n must be >= 2");
    Eigen::MatrixXd factor;
    if (!dist.covariance.is_identity()) factor = covariance_factor(dist.covariance);
    SampleMatrix out;
    out.data.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dist.d));
    out.seed = seed;
    Engine engine(seed);
    fill_rows(dist, factor, engine, out.data);
    return out;
}

SampleMatrix load_sample(const std::filesystem::path& path, const LoadOptions& options) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    const char sep = options.format == TableFormat::csv ? ',' : '\t';

    std::vector<double> values;
    std::size_t cols = 0;
    std::size_t rows = 0;
    std::string line;
    std::size_t line_no = 0;
    bool header_pending = options.header;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (header_pending) {
            header_pending = false;
            continue;
        }
        if (line.empty()) continue;
        std::size_t count = 0;
        std::size_t start = 0;
        while (true) {
            const std::size_t stop = line.find(sep, start);
            std::string_view cell(line.data() + start,
                                  (stop == std::string::npos ? line.size() : stop) - start);
            while (!cell.empty() && cell.front() == ' ') cell.remove_prefix(1);
            while (!cell.empty() && cell.back() == ' ') cell.remove_suffix(1);
            double v = 0.0;
            const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size() ||
                !std::isfinite(v))
                throw IoError(path.string() + ": non-numeric cell '" + std::string(cell) +
                              "' at row " + std::to_string(line_no) + ", column " +
                              std::to_string(count + 1));
            values.push_back(v);
            ++count;
            if (stop == std::string::npos) break;
            start = stop + 1;
        }
        if (rows == 0) {
            cols = count;
        } else if (count != cols) {
            throw IoError(path.string() + ": ragged row " + std::to_string(line_no) + " has " +
                          std::to_string(count) + " columns, expected " + std::to_string(cols));
        }
        ++rows;
    }
    if (rows == 0) throw IoError(path.string() + ": empty file (no data rows)");
    if (rows < 2)
        throw IoError(path.string() + ": need at least 2 observations, found 1");

    SampleMatrix out;
    out.data = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        values.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    return out;
}

void save_sample(const SampleMatrix& sample, const std::filesystem::path& path, TableFormat format) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    const char sep = format == TableFormat::csv ? ',' : '\t';
    for (Eigen::Index i = 0; i < sample.data.rows(); ++i) {
        for (Eigen::Index j = 0; j < sample.data.cols(); ++j) {
            if (j) out << sep;
            out << detail::format_double(sample.data(i, j));
        }
        out << '\n';
    }
    if (!out) throw IoError("write to '" + path.string() + "' failed");
}

// ---------------------------------------------------------------------------

Marginal::Marginal(Family family, double shape, double scale)
    : family_(family), shape_(shape), scale_(scale), unit_(scale) {
    if ((family == Family::student_t || family == Family::symmetric_pareto) && shape > 2.0)
        unit_ = scale * std::sqrt((shape - 2.0) / shape);
}

double Marginal::pdf(double x) const {
    switch (family_) {
        case Family::gaussian: {
            const double z = x / scale_;
            return std::exp(-0.5 * z * z) / (scale_ * std::sqrt(2.0 * std::numbers::pi));
        }
        case Family::student_t: {
            const boost::math::students_t_distribution<double> t(shape_);
            return boost::math::pdf(t, x / unit_) / unit_;
        }
        case Family::symmetric_pareto: {
            const double ax = std::abs(x);
            if (ax < unit_) return 0.0;
            return 0.5 * shape_ * std::pow(unit_, shape_) * std::pow(ax, -shape_ - 1.0);
        }
        case Family::rademacher: break;
    }
    throw ConfigError("pdf requested for a discrete marginal");
}

double Marginal::abs_sf(double m) const {
    if (m < 0.0) return 1.0;
    switch (family_) {
        case Family::gaussian: return std::erfc(m / (scale_ * std::numbers::sqrt2));
        case Family::student_t: {
            const boost::math::students_t_distribution<double> t(shape_);
            return 2.0 * boost::math::cdf(boost::math::complement(t, m / unit_));
        }
        case Family::symmetric_pareto: return m < unit_ ? 1.0 : std::pow(unit_ / m, shape_);
        case Family::rademacher: return m < scale_ ? 1.0 : 0.0;
    }
    return 0.0;
}

double Marginal::abs_cdf(double m) const { return 1.0 - abs_sf(m); }

double Marginal::sq_sf(double c2) const {
    if (c2 < 0.0) return 1.0;
    if (family_ == Family::rademacher) return scale_ * scale_ > c2 ? 1.0 : 0.0;
    return abs_sf(std::sqrt(c2));
}

double Marginal::partial_moment(double p, double lo2, double hi2) const {
    lo2 = std::max(lo2, 0.0);
    if (!(hi2 > lo2)) return 0.0;
    if (family_ == Family::rademacher) {
        const double s2 = scale_ * scale_;
        return (lo2 < s2 && s2 <= hi2) ? std::pow(scale_, p) : 0.0;
    }
    const double lo = std::sqrt(lo2);
    const double hi = std::sqrt(hi2);
    switch (family_) {
        case Family::symmetric_pareto: {
            const double a = shape_;
            const double x0 = unit_;
            const double l = std::max(lo, x0);
            if (!(hi > l)) return 0.0;
            const double c = a * std::pow(x0, a);
            if (p == a) return std::isinf(hi) ? kInf : c * (std::log(hi) - std::log(l));
            if (std::isinf(hi)) return p > a ? kInf : c * std::pow(l, p - a) / (a - p);
            return c * (std::pow(hi, p - a) - std::pow(l, p - a)) / (p - a);
        }
        case Family::student_t:
            if (std::isinf(hi) && p >= shape_) return kInf;
            [[fallthrough]];
        case Family::gaussian:
            return 2.0 * detail::integrate(
                             [&](double x) { return std::pow(x, p) * pdf(x); }, lo, hi);
        case Family::rademacher: break;
    }
    return 0.0;
}

double Marginal::signed_partial_mean(double lo2, double hi2) const {
    lo2 = std::max(lo2, 0.0);
    if (!(hi2 > lo2)) return 0.0;
    if (family_ == Family::rademacher) {
        // Atoms at +-scale with mass 1/2 each.
        const double s2 = scale_ * scale_;
        return (lo2 < s2 && s2 <= hi2) ? 0.5 * scale_ - 0.5 * scale_ : 0.0;
    }
    const double lo = std::sqrt(lo2);
    const double hi = std::sqrt(hi2);
    if (std::isinf(hi) && family_ != Family::gaussian && shape_ <= 1.0) return 0.0;  // symmetric PV
    const auto f = [&](double x) { return x * pdf(x); };
    return detail::integrate(f, lo, hi) + detail::integrate([&](double x) { return f(-x); }, lo, hi);
}

double Marginal::second_moment() const {
    switch (family_) {
        case Family::gaussian: return scale_ * scale_;
        case Family::rademacher: return scale_ * scale_;
        case Family::student_t:
            if (shape_ > 2.0) return scale_ * scale_;
            return kInf;
        case Family::symmetric_pareto:
            if (shape_ > 2.0) return scale_ * scale_;
            return kInf;
    }
    return kInf;
}

std::vector<double> Marginal::breakpoints() const {
    if (family_ == Family::rademacher || family_ == Family::symmetric_pareto) return {unit_};
    return {};
}

Marginal coordinate_marginal(const DistributionSpec& dist, std::size_t j) {
    dist.validate();
    if (!dist.covariance.is_identity())
        throw ConfigError(
            "analytic coordinate law requires identity covariance (mixed marginals are unknown)");
    return Marginal(dist.family, dist.shape, dist.scale_of(j));
}

}  // namespace snclt
