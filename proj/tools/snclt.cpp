#include "snclt/bounds.hpp"
#include "snclt/error.hpp"
#include "snclt/harness.hpp"
#include "snclt/statistics.hpp"
#include "snclt/truncation.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>

namespace {

using nlohmann::json;
using namespace snclt;

struct Globals {
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> workers;
    std::string out;
    std::string format = "json";
    bool format_set = false;
};

struct SourceArgs {
    std::string spec;
    std::string data;
    bool header = false;
    bool tsv = false;
    std::optional<std::size_t> n;
    std::string mode = "per_coordinate";
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("read failure on '" + path + "'");
    return ss.str();
}

/// A JSON document given inline (starting with '{') or as a file path.
json json_argument(const std::string& arg, const char* what) {
    const bool inline_doc = !arg.empty() && arg.front() == '{';
    const std::string text = inline_doc ? arg : slurp(arg);
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string(what) + " '" + (inline_doc ? "<inline>" : arg) +
                          "' is not valid JSON: " + e.what());
    }
}

DistributionSpec parse_spec(const std::string& arg) {
    try {
        auto d = json_argument(arg, "spec").get<DistributionSpec>();
        d.validate();
        return d;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("spec: ") + e.what());
    }
}

void emit(const Globals& g, const std::string& text) {
    if (g.out.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(g.out, std::ios::binary);
    if (!out) throw IoError("cannot open '" + g.out + "' for writing");
    out << text;
    out.close();
    if (!out) throw IoError("write failure on '" + g.out + "'");
}

SampleMatrix load_data(const SourceArgs& s) {
    LoadOptions opt;
    opt.header = s.header;
    opt.format = s.tsv ? TableFormat::tsv : TableFormat::csv;
    return load_sample(s.data, opt);
}

void require_one_source(const SourceArgs& s) {
    if (s.spec.empty() == s.data.empty())
        throw ConfigError("exactly one of --spec or --data is required");
}

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

std::string csv_table(const std::vector<std::string>& header,
                      const std::vector<std::vector<std::string>>& rows) {
    std::string out;
    for (std::size_t c = 0; c < header.size(); ++c) out += (c ? "," : "") + header[c];
    out += '\n';
    for (const auto& r : rows) {
        for (std::size_t c = 0; c < r.size(); ++c) out += (c ? "," : "") + r[c];
        out += '\n';
    }
    return out;
}

std::string num(double v) {
    std::ostringstream ss;
    ss.precision(17);
    ss << v;
    return ss.str();
}

int cmd_levels(const Globals& g, const SourceArgs& s) {
    require_one_source(s);
    const auto mode = parse_truncation_mode(s.mode);
    TruncationLevels levels;
    TruncatedMomentReport moments;
    if (!s.data.empty()) {
        const auto sample = load_data(s);
        const std::size_t n = s.n.value_or(sample.n());
        levels = solve_levels(sample, n, mode);
        moments = moment_report(sample, levels, n);
    } else {
        if (!s.n) throw ConfigError("--n is required with --spec");
        const auto dist = parse_spec(s.spec);
        levels = solve_levels(dist, *s.n, mode);
        moments = moment_report(dist, levels, *s.n);
    }
    if (g.format == "csv") {
        std::vector<std::vector<std::string>> rows;
        const auto a = levels.levels();
        for (std::size_t j = 0; j < a.size(); ++j)
            rows.push_back({std::to_string(j), num(a[j]), num(levels.level_sq[j])});
        emit(g, csv_table({"j", "level", "level_squared"}, rows));
    } else {
        emit(g, json{{"levels", levels}, {"moments", moments}}.dump(2) + "\n");
    }
    return 0;
}

int cmd_stat(const Globals& g, const SourceArgs& s) {
    if (s.data.empty()) throw ConfigError("--data is required");
    const auto sample = load_data(s);
    const std::size_t n = sample.n();
    const auto mode = parse_truncation_mode(s.mode);
    const auto levels = solve_levels(sample, n, mode);
    const auto trunc = truncate(sample, levels);
    const auto t = self_normalized(sample);
    const auto ty = self_normalized(trunc.y);
    const auto e = eta(trunc);
    const auto tilt = tilted_sum(trunc);
    if (g.format == "csv") {
        std::vector<std::vector<std::string>> rows;
        for (std::size_t j = 0; j < sample.d(); ++j)
            rows.push_back({std::to_string(j), num(t.values[j]), num(ty.values[j]), num(e.eta[j]),
                            e.in_band[j] ? "1" : "0", num(tilt.y_tilde_sum[j])});
        emit(g, csv_table({"j", "t_n", "t_n_y", "eta", "in_band", "tilted_sum"}, rows));
        return 0;
    }
    json j{{"n", n},
           {"d", sample.d()},
           {"t_n", to_vector(t.values)},
           {"t_n_max", t.max_value},
           {"t_n_argmax", t.argmax},
           {"degenerate", t.degenerate_mask},
           {"t_n_y", to_vector(ty.values)},
           {"t_n_y_max", ty.max_value},
           {"any_truncated", trunc.any_truncated()},
           {"eta", to_vector(e.eta)},
           {"in_band", e.in_band},
           {"tilted_sum", to_vector(tilt.y_tilde_sum)},
           {"tilted_max", tilt.max_value},
           {"levels", levels}};
    if (n >= 2) {
        const auto u = ustat_diagnostics(trunc);
        j["ustat"] = {{"u_max", u.u_max}, {"s1", u.s1}, {"s2", u.s2}, {"s3", u.s3}};
    }
    emit(g, j.dump(2) + "\n");
    return 0;
}

struct BoundArgs {
    std::string inputs;
    BoundInputs direct;
};

int cmd_bound(const Globals& g, const SourceArgs& s, const BoundArgs& b) {
    BoundInputs in = b.direct;
    if (!b.inputs.empty()) {
        try {
            in = json_argument(b.inputs, "inputs").get<BoundInputs>();
        } catch (const json::exception& e) {
            throw ConfigError(std::string("inputs: ") + e.what());
        }
    } else if (!s.spec.empty() || !s.data.empty()) {
        require_one_source(s);
        const auto mode = parse_truncation_mode(s.mode);
        TruncatedMomentReport m;
        if (!s.data.empty()) {
            const auto sample = load_data(s);
            in.n = s.n.value_or(sample.n());
            in.d = sample.d();
            m = moment_report(sample, solve_levels(sample, in.n, mode), in.n);
        } else {
            if (!s.n) throw ConfigError("--n is required with --spec");
            const auto dist = parse_spec(s.spec);
            in.n = *s.n;
            in.d = dist.d;
            m = moment_report(dist, solve_levels(dist, in.n, mode), in.n);
        }
        in.mu1 = m.mu1;
        in.mu3 = m.mu3;
        in.tail_prob = m.tail_prob;
        in.r_n = m.r_n;
    }
    const auto report = theorem1_bound(in);
    if (g.format == "csv") {
        emit(g, csv_table({"eps_star", "total_theorem1", "total_theorem1_X", "term_tail",
                           "term_mu1", "term_mu3", "corollary_value", "propB1_value"},
                          {{report.eps_star ? num(*report.eps_star) : "", num(report.total_theorem1),
                            num(report.total_theorem1_X), num(report.term_tail), num(report.term_mu1),
                            num(report.term_mu3), num(report.corollary.value),
                            num(report.propB1.value)}}));
    } else {
        emit(g, json(report).dump(2) + "\n");
    }
    return 0;
}

int cmd_simulate(const Globals& g, const std::string& config_path, bool progress) {
    auto config = load_config(config_path);
    if (g.seed) config.master_seed = *g.seed;
    if (g.workers) config.workers = *g.workers;
    config.validate();
    std::vector<KSResult> results;
    std::optional<RateFit> fit;
    if (config.n_grid.size() >= 3) {
        for (std::size_t n : config.n_grid) {
            results.push_back(run_ks_cell(config, n));
            if (progress)
                std::cerr << "n=" << n << " delta_hat=" << results.back().delta_hat
                          << " se=" << results.back().se << '\n';
        }
        try {
            fit = fit_rate(results);
        } catch (const ConfigError& e) {
            std::cerr << "note: " << e.what() << '\n';
        }
    } else {
        for (std::size_t n : config.n_grid) results.push_back(run_ks_cell(config, n));
    }
    const auto format = parse_report_format(g.format_set ? g.format : "csv");
    emit(g, render_report(make_report(results, fit), format));
    return 0;
}

int cmd_report(const Globals& g, const std::string& in_path) {
    const auto report = load_report(in_path);
    const auto format = parse_report_format(g.format);
    emit(g, render_report(report, format));
    return 0;
}

int run(int argc, char** argv) {
    CLI::App app{"Self-normalized high-dimensional CLT toolkit"};
    app.require_subcommand(1);
    Globals g;
    std::uint64_t seed = 0;
    std::size_t workers = 1;
    auto* seed_opt = app.add_option("--seed", seed, "Master seed (overrides the config)");
    auto* workers_opt =
        app.add_option("--workers", workers, "Worker threads (overrides the config)")
            ->check(CLI::PositiveNumber);
    app.add_option("--out", g.out, "Output path (default stdout)");
    auto* format_opt = app.add_option("--format", g.format, "Output format")
                           ->check(CLI::IsMember({"csv", "json"}));

    SourceArgs src;
    const auto add_source = [&](CLI::App* sub, bool with_spec) {
        if (with_spec)
            sub->add_option("--spec", src.spec, "Distribution spec (JSON file or inline object)");
        sub->add_option("--data", src.data, "Sample file, one observation per row");
        sub->add_flag("--header", src.header, "Skip the first line of --data");
        sub->add_flag("--tsv", src.tsv, "Tab-separated --data");
        sub->add_option("--mode", src.mode, "Truncation mode")
            ->check(CLI::IsMember({"per_coordinate", "global"}));
    };

    auto* levels = app.add_subcommand("levels", "Solve truncation levels");
    add_source(levels, true);
    levels->add_option("--n", src.n, "Sample size in the level equation");

    auto* stat = app.add_subcommand("stat", "Self-normalized, truncated and tilted statistics");
    add_source(stat, false);

    auto* bound = app.add_subcommand("bound", "Evaluate the explicit bound components");
    BoundArgs bargs;
    bound->add_option("--inputs", bargs.inputs, "Bound inputs (JSON file or inline object)");
    add_source(bound, true);
    bound->add_option("--n", src.n, "Sample size");
    bound->add_option("--d", bargs.direct.d, "Dimension");
    bound->add_option("--mu1", bargs.direct.mu1, "n times the sup-norm of the truncated mean");
    bound->add_option("--mu3", bargs.direct.mu3, "n times the third sup-norm moment of Y");
    bound->add_option("--tail-prob", bargs.direct.tail_prob, "n times the probability that some coordinate is truncated");
    bound->add_option("--r-n", bargs.direct.r_n, "Second-moment remainder of the truncation");
    bound->add_option("--nu", bargs.direct.nu_2delta, "nu_{2+delta}");
    bound->add_option("--varpi", bargs.direct.varpi, "Max entrywise gap between the two Gaussian covariances");

    auto* simulate = app.add_subcommand("simulate", "Run KS cells or a rate sweep");
    std::string config_path;
    bool progress = false;
    simulate->add_option("--config", config_path, "Experiment config (JSON)")->required();
    simulate->add_flag("--progress", progress, "Per-cell progress on stderr");

    auto* report = app.add_subcommand("report", "Convert a report between csv and json");
    std::string in_path;
    report->add_option("--in", in_path, "Input report (.csv or .json)")->required();

    for (auto* sub : {levels, stat, bound, simulate, report}) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    if (seed_opt->count()) g.seed = seed;
    if (workers_opt->count()) g.workers = workers;
    g.format_set = format_opt->count() > 0;
    if (bound->parsed() && src.n) bargs.direct.n = *src.n;

    if (levels->parsed()) return cmd_levels(g, src);
    if (stat->parsed()) return cmd_stat(g, src);
    if (bound->parsed()) return cmd_bound(g, src, bargs);
    if (simulate->parsed()) return cmd_simulate(g, config_path, progress);
    return cmd_report(g, in_path);
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const snclt::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const snclt::DegeneracyError& e) {
        std::cerr << "numerical degeneracy: " << e.what() << '\n';
        return 3;
    } catch (const snclt::IoError& e) {
        std::cerr << "i/o error: " << e.what() << '\n';
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 1;
    }
}
