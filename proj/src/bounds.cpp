#include "snclt/bounds.hpp"

#include "snclt/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace snclt {

namespace {

void require_nonneg(double v, const char* name) {
    if (!(v >= 0.0)) throw ConfigError(std::string(name) + " must be >= 0");
}

void require_dim(std::size_t d) {
    if (d < 1) throw ConfigError("dimension d must be >= 1");
}

nlohmann::json optional_json(const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::optional<double> optional_from(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<double>();
}

}  // namespace

double log_ed(std::size_t d) {
    require_dim(d);
    return 1.0 + std::log(static_cast<double>(d));
}

double epsilon_star(double mu1, double mu3, std::size_t d) {
    require_nonneg(mu1, "mu1");
    require_nonneg(mu3, "mu3");
    if (mu1 == 0.0 && mu3 == 0.0)
        throw ConfigError("epsilon_star is undefined when mu1 = mu3 = 0");
    const double l = log_ed(d);
    double eps = std::pow(l, 0.25) * (std::sqrt(mu3) + std::sqrt(mu1));
    eps += std::pow(l, 2.0 / 3.0) * std::cbrt(mu3);
    eps += std::pow(mu1, 2.0 / 3.0);
    eps += std::pow(l, 0.125) * std::pow(mu3, 0.25);
    eps += std::pow(l, 0.2) * std::pow(mu3, 0.4);
    return eps;
}

double phi(double eps, double mu1, double mu3, std::size_t d) {
    if (!(eps > 0.0)) throw ConfigError("phi requires eps > 0");
    require_nonneg(mu1, "mu1");
    require_nonneg(mu3, "mu3");
    const double l = log_ed(d);
    const double l12 = std::sqrt(l);
    const double l32 = l * l12;
    return (l32 * mu3 + l12 * mu1) / eps + (l * l * l * mu3 + l * mu1 * mu1) / (eps * eps) +
           l32 * mu3 / (eps * eps * eps) + l * l * mu3 * mu3 / (eps * eps * eps * eps) + eps * l;
}

std::array<double, 4> smoothing_h(double eps, std::size_t d) {
    if (!(eps > 0.0)) throw ConfigError("h_j requires eps > 0");
    const double l12 = std::sqrt(log_ed(d));
    std::array<double, 4> h{};
    double v = 1.0;
    for (std::size_t j = 0; j < 4; ++j) {
        v *= l12 / eps;
        h[j] = v;
    }
    return h;
}

void BoundInputs::validate() const {
    if (n < 1) throw ConfigError("n must be >= 1");
    require_dim(d);
    require_nonneg(mu1, "mu1");
    require_nonneg(mu3, "mu3");
    require_nonneg(tail_prob, "tail_prob");
    require_nonneg(r_n, "r_n");
    require_nonneg(nu_2delta, "nu_2delta");
    require_nonneg(varpi, "varpi");
    if (!(delta > 0.0 && delta <= 1.0)) throw ConfigError("delta must be in (0, 1]");
    if (!(q > 2.0)) throw ConfigError("q must be > 2");
    if (!(B_n >= 1.0)) throw ConfigError("B_n must be >= 1");
    if (!(D_n >= 1.0)) throw ConfigError("D_n must be >= 1");
    if (!(b1 > 0.0) || !(b2 > 0.0)) throw ConfigError("b1 and b2 must be > 0");
}

BoundReport theorem1_bound(const BoundInputs& in) {
    in.validate();
    const double l = log_ed(in.d);
    BoundReport r;
    if (in.mu1 > 0.0 || in.mu3 > 0.0) {
        const double eps = epsilon_star(in.mu1, in.mu3, in.d);
        r.eps_star = eps;
        r.phi_at_eps_star = phi(eps, in.mu1, in.mu3, in.d);
        r.h = smoothing_h(eps, in.d);
    }
    r.term_tail = in.tail_prob;
    r.term_mu1 = std::sqrt(std::pow(l, 2.5) * in.mu1);
    r.term_mu3 = std::pow(std::pow(l, 5.0) * in.mu3, 0.25);
    r.term_r_n = l * std::sqrt(in.r_n);
    r.term_comparison = gaussian_comparison_bound(in.varpi, in.d, in.lambda_min);
    const double core = r.term_tail + r.term_mu1 + r.term_mu3;
    r.total_theorem1 = std::min(1.0, core);
    r.total_theorem1_X = std::min(1.0, core + r.term_r_n);
    r.corollary = corollary_bound(in.nu_2delta, in.delta, in.n, in.d);
    r.propB1 = propB1_bound(in.B_n, in.D_n, in.q, in.n, in.d);
    return r;
}

CorollaryValue corollary_bound(double nu_2delta, double delta, std::size_t n, std::size_t d) {
    if (!(delta > 0.0 && delta <= 1.0)) throw ConfigError("delta must be in (0, 1]");
    require_nonneg(nu_2delta, "nu_2delta");
    if (n < 1) throw ConfigError("n must be >= 1");
    const double l = log_ed(d);
    CorollaryValue out;
    out.nu_below_one = nu_2delta < 1.0;
    out.value = std::min(1.0, std::pow(l, 1.25) * std::pow(static_cast<double>(n), -delta / 8.0) *
                                  std::pow(nu_2delta, 0.25));
    return out;
}

ComparisonBound gaussian_comparison_bound(double varpi, std::size_t d, double lambda_min) {
    require_nonneg(varpi, "varpi");
    const double l = log_ed(d);
    ComparisonBound out;
    out.sqrt_variant = l * std::sqrt(varpi);
    if (lambda_min > 0.0) {
        out.refined_variant =
            varpi == 0.0 ? 0.0 : l * varpi * std::max(std::log(1.0 / varpi), 1.0) / lambda_min;
    }
    return out;
}

PropB1Value propB1_bound(double B_n, double D_n, double q, std::size_t n, std::size_t d) {
    if (!(B_n >= 1.0)) throw ConfigError("B_n must be >= 1");
    if (!(D_n >= 1.0)) throw ConfigError("D_n must be >= 1");
    if (!(q > 2.0)) throw ConfigError("q must be > 2");
    if (n < 1) throw ConfigError("n must be >= 1");
    require_dim(d);
    const double ld = std::log(static_cast<double>(d));
    const double nn = static_cast<double>(n);
    const double tail_exp = 0.5 - 1.0 / q;
    PropB1Value out;
    out.term_b = std::pow(std::pow(B_n, 4.0) * std::pow(ld, 5.0) / nn, 0.25);
    out.term_d = D_n * std::pow(ld, 1.5) / std::pow(nn, tail_exp);
    out.value = std::min(1.0, out.term_b + out.term_d);
    out.phi_inverse = B_n * std::pow(ld, 0.75) / std::pow(nn, 0.25) + D_n * ld / std::pow(nn, tail_exp);
    return out;
}

LemmaRhs lemma_rhs_diagnostics(double mu1, double mu3, std::size_t n, std::size_t d,
                               double tail_prob) {
    require_nonneg(mu1, "mu1");
    require_nonneg(mu3, "mu3");
    require_nonneg(tail_prob, "tail_prob");
    if (n < 1) throw ConfigError("n must be >= 1");
    const double l = log_ed(d);
    LemmaRhs out;
    out.lemma2_rhs = tail_prob;
    out.lemma3_rhs = l * mu3;
    out.lemma6_rhs = l * l * mu3 + mu1 * mu1;
    out.lemma7_rhs[0] = l + std::pow(l * l * mu3, 2.0 / 3.0) + std::sqrt(l * mu3) + mu1 * mu1;
    out.lemma7_rhs[1] = l * mu3 + std::pow(std::sqrt(l) * mu3, 4.0 / 3.0);
    out.lemma7_rhs[2] = l * mu3 + mu1 * mu1;
    return out;
}

void from_json(const nlohmann::json& j, BoundInputs& in) {
    in = BoundInputs{};
    in.n = j.value("n", in.n);
    in.d = j.value("d", in.d);
    in.mu1 = j.value("mu1", in.mu1);
    in.mu3 = j.value("mu3", in.mu3);
    in.tail_prob = j.value("tail_prob", in.tail_prob);
    in.r_n = j.contains("r_n") && j.at("r_n").is_null() ? std::numeric_limits<double>::infinity()
                                                         : j.value("r_n", in.r_n);
    in.delta = j.value("delta", in.delta);
    in.nu_2delta = j.value("nu_2delta", in.nu_2delta);
    in.varpi = j.value("varpi", in.varpi);
    in.lambda_min = j.value("lambda_min", in.lambda_min);
    in.B_n = j.value("B_n", in.B_n);
    in.D_n = j.value("D_n", in.D_n);
    in.q = j.value("q", in.q);
    in.b1 = j.value("b1", in.b1);
    in.b2 = j.value("b2", in.b2);
}

void to_json(nlohmann::json& j, const BoundReport& r) {
    j = nlohmann::json{
        {"eps_star", optional_json(r.eps_star)},
        {"phi_at_eps_star", optional_json(r.phi_at_eps_star)},
        {"h", r.h ? nlohmann::json(*r.h) : nlohmann::json(nullptr)},
        {"term_tail", r.term_tail},
        {"term_mu1", r.term_mu1},
        {"term_mu3", r.term_mu3},
        {"term_r_n", r.term_r_n},
        {"term_comparison",
         {{"sqrt_variant", r.term_comparison.sqrt_variant},
          {"refined_variant", optional_json(r.term_comparison.refined_variant)}}},
        {"total_theorem1", r.total_theorem1},
        {"total_theorem1_X", r.total_theorem1_X},
        {"corollary_value", r.corollary.value},
        {"corollary_nu_below_one", r.corollary.nu_below_one},
        {"propB1_value", r.propB1.value},
        {"propB1_terms",
         {{"term_b", r.propB1.term_b},
          {"term_d", r.propB1.term_d},
          {"phi_inverse", r.propB1.phi_inverse}}},
        {"convention", r.convention}};
}

void from_json(const nlohmann::json& j, BoundReport& r) {
    r.eps_star = optional_from(j, "eps_star");
    r.phi_at_eps_star = optional_from(j, "phi_at_eps_star");
    if (j.contains("h") && !j.at("h").is_null())
        r.h = j.at("h").get<std::array<double, 4>>();
    else
        r.h.reset();
    j.at("term_tail").get_to(r.term_tail);
    j.at("term_mu1").get_to(r.term_mu1);
    j.at("term_mu3").get_to(r.term_mu3);
    // A non-finite term serializes as null.
    r.term_r_n = j.contains("term_r_n")
                     ? optional_from(j, "term_r_n").value_or(std::numeric_limits<double>::infinity())
                     : 0.0;
    const auto& c = j.at("term_comparison");
    c.at("sqrt_variant").get_to(r.term_comparison.sqrt_variant);
    r.term_comparison.refined_variant = optional_from(c, "refined_variant");
    j.at("total_theorem1").get_to(r.total_theorem1);
    j.at("total_theorem1_X").get_to(r.total_theorem1_X);
    j.at("corollary_value").get_to(r.corollary.value);
    r.corollary.nu_below_one = j.value("corollary_nu_below_one", false);
    j.at("propB1_value").get_to(r.propB1.value);
    if (j.contains("propB1_terms")) {
        const auto& p = j.at("propB1_terms");
        p.at("term_b").get_to(r.propB1.term_b);
        p.at("term_d").get_to(r.propB1.term_d);
        p.at("phi_inverse").get_to(r.propB1.phi_inverse);
    }
    j.at("convention").get_to(r.convention);
}

void to_json(nlohmann::json& j, const LemmaRhs& r) {
    j = nlohmann::json{{"lemma2_rhs", r.lemma2_rhs},
                       {"lemma3_rhs", r.lemma3_rhs},
                       {"lemma6_rhs", r.lemma6_rhs},
                       {"lemma7_rhs", r.lemma7_rhs},
                       {"q", r.q}};
}

}  // namespace snclt
