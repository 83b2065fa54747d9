#pragma once

#include <nlohmann/json.hpp>

#include <array>
#include <cstddef>
#include <optional>
#include <string>

namespace snclt {

inline constexpr const char* kBoundConvention = "structural C=1";

/// log(e d) = 1 + log d.
double log_ed(std::size_t d);

/// Closed-form smoothing bandwidth. Throws ConfigError when mu1 = mu3 = 0.
double epsilon_star(double mu1, double mu3, std::size_t d);

double phi(double eps, double mu1, double mu3, std::size_t d);

/// h_j(eps) = eps^{-j} log^{j/2}(ed), j = 1..4.
std::array<double, 4> smoothing_h(double eps, std::size_t d);

struct BoundInputs {
    std::size_t n = 1;
    std::size_t d = 1;
    double mu1 = 0.0;
    double mu3 = 0.0;
    double tail_prob = 0.0;
    double r_n = 0.0;
    double delta = 1.0;
    double nu_2delta = 1.0;
    double varpi = 0.0;
    double lambda_min = 1.0;
    double B_n = 1.0;
    double D_n = 1.0;
    double q = 3.0;
    double b1 = 1.0;
    double b2 = 1.0;

    void validate() const;
};

/// Missing fields keep their defaults; a null r_n reads as infinity.
void from_json(const nlohmann::json& j, BoundInputs& in);

struct ComparisonBound {
    double sqrt_variant = 0.0;
    /// Absent when lambda_min <= 0.
    std::optional<double> refined_variant;
};

struct CorollaryValue {
    double value = 0.0;
    /// nu_2delta < 1 cannot happen for standardized coordinates; reported, not fatal.
    bool nu_below_one = false;
};

struct PropB1Value {
    double value = 0.0;
    double term_b = 0.0;
    double term_d = 0.0;
    /// B_n log^{3/4}(d) / n^{1/4} + D_n log(d) / n^{1/2 - 1/q}
    double phi_inverse = 0.0;
};

struct BoundReport {
    /// Absent when mu1 = mu3 = 0.
    std::optional<double> eps_star;
    std::optional<double> phi_at_eps_star;
    std::optional<std::array<double, 4>> h;
    double term_tail = 0.0;
    double term_mu1 = 0.0;
    double term_mu3 = 0.0;
    /// log(ed) sqrt(r_n), the extra term of the correlation-reference total.
    double term_r_n = 0.0;
    ComparisonBound term_comparison;
    double total_theorem1 = 0.0;
    double total_theorem1_X = 0.0;
    CorollaryValue corollary;
    PropB1Value propB1;
    std::string convention = kBoundConvention;
};

void to_json(nlohmann::json& j, const BoundReport& r);
void from_json(const nlohmann::json& j, BoundReport& r);

BoundReport theorem1_bound(const BoundInputs& inputs);

CorollaryValue corollary_bound(double nu_2delta, double delta, std::size_t n, std::size_t d);

ComparisonBound gaussian_comparison_bound(double varpi, std::size_t d, double lambda_min);

PropB1Value propB1_bound(double B_n, double D_n, double q, std::size_t n, std::size_t d);

struct LemmaRhs {
    double lemma2_rhs = 0.0;
    double lemma3_rhs = 0.0;
    double lemma6_rhs = 0.0;
    /// Bounds for the squared maxima of sum Y, sum (Y^2 - 1/n) and sum (Y^3 - Y/n).
    std::array<double, 3> lemma7_rhs{};
    /// Moment order used by the diagnostics (fixed).
    double q = 3.0;
};

void to_json(nlohmann::json& j, const LemmaRhs& r);

LemmaRhs lemma_rhs_diagnostics(double mu1, double mu3, std::size_t n, std::size_t d,
                               double tail_prob = 0.0);

}  // namespace snclt
