#pragma once

// GenEval-style benchmark over the micro-world: category prompt suites,
// generation with or without Best-of-N verification, exact-oracle scoring and
// CSV / JSON / SVG reports.

#include "maskverify/digest.hpp"
#include "maskverify/errors.hpp"
#include "maskverify/generator.hpp"
#include "maskverify/json_io.hpp"
#include "maskverify/parallel.hpp"
#include "maskverify/preference.hpp"
#include "maskverify/prompt.hpp"
#include "maskverify/selector.hpp"
#include "maskverify/verifier.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

namespace maskverify {

enum class BenchStrategy : std::uint8_t { none, outcome, rule, cot };
enum class Aggregation : std::uint8_t { top1, mean_topk };

inline constexpr std::array<BenchStrategy, 4> all_bench_strategies{BenchStrategy::none, BenchStrategy::outcome,
                                                                   BenchStrategy::rule, BenchStrategy::cot};
inline constexpr std::array<Aggregation, 2> all_aggregations{Aggregation::top1, Aggregation::mean_topk};

inline constexpr std::string_view to_string(BenchStrategy s) {
    constexpr std::array<std::string_view, 4> names{"none", "outcome", "rule", "cot"};
    return names[static_cast<std::size_t>(s)];
}

inline constexpr std::string_view to_string(Aggregation a) { return a == Aggregation::top1 ? "top1" : "mean_topk"; }

inline std::optional<BenchStrategy> bench_strategy_from_string(std::string_view t) {
    return enum_from_string(t, all_bench_strategies);
}
inline std::optional<Aggregation> aggregation_from_string(std::string_view t) {
    return enum_from_string(t, all_aggregations);
}

struct CategoryCount {
    Category category{};
    int count = 0;

    bool operator==(const CategoryCount &) const = default;
};

struct BenchConfig {
    std::vector<CategoryCount> counts = default_counts(100);
    PlantedPredictorConfig generator;
    int steps      = default_steps;
    double scale   = default_cfg_scale;
    BenchStrategy strategy = BenchStrategy::cot;
    int n          = default_candidates;
    int k          = default_top_k;
    double rho     = 0.0;
    std::uint64_t seed = 0;
    Aggregation aggregation = Aggregation::top1;
    GridSize size;
    unsigned jobs = 1;  // not part of the configuration identity

    static std::vector<CategoryCount> default_counts(int per_category) {
        std::vector<CategoryCount> out;
        for (Category c : geneval_categories) {
            out.push_back({c, per_category});
        }
        return out;
    }

    // Effective configuration: strategy none forces a single candidate.
    BenchConfig normalized() const {
        BenchConfig c = *this;
        if (c.strategy == BenchStrategy::none) {
            c.n = 1;
        }
        return c;
    }

    void validate() const {
        if (counts.empty()) {
            throw InvalidArgument("benchmark needs at least one category");
        }
        for (std::size_t i = 0; i < counts.size(); ++i) {
            if (counts[i].count < 1) {
                throw InvalidArgument("category counts must be >= 1");
            }
            for (std::size_t j = i + 1; j < counts.size(); ++j) {
                if (counts[i].category == counts[j].category) {
                    throw InvalidArgument("category listed twice");
                }
            }
        }
        if (n < 1 || k < 1 || steps < 1) {
            throw InvalidArgument("N, K and steps must be >= 1");
        }
        if (!std::isfinite(scale)) {
            throw InvalidArgument("guidance scale must be finite");
        }
        generator.validate();
        AnswererConfig{rho}.validate();
    }
};

inline json to_json(const BenchConfig & c) {
    json counts = json::array();
    for (const CategoryCount & cc : c.counts) {
        counts.push_back({{"category", to_string(cc.category)}, {"count", cc.count}});
    }
    return json{
        {"counts", counts},
        {"epsilon", c.generator.epsilon},
        {"temperature", c.generator.temperature},
        {"background_prior", c.generator.background_prior},
        {"steps", c.steps},
        {"scale", c.scale},
        {"strategy", to_string(c.strategy)},
        {"n", c.n},
        {"k", c.k},
        {"rho", c.rho},
        {"seed", c.seed},
        {"aggregation", to_string(c.aggregation)},
        {"width", c.size.width},
        {"height", c.size.height},
    };
}

inline BenchConfig bench_config_from_json(const json & j) {
    return detail::schema_guard("bench config", [&] {
        BenchConfig c;
        c.counts.clear();
        for (const json & cc : j.at("counts")) {
            c.counts.push_back({detail::enum_field<Category>(cc, "category", category_from_string),
                                cc.at("count").get<int>()});
        }
        c.generator.epsilon          = j.at("epsilon").get<double>();
        c.generator.temperature      = j.at("temperature").get<double>();
        c.generator.background_prior = j.at("background_prior").get<double>();
        c.steps                      = j.at("steps").get<int>();
        c.scale                      = j.at("scale").get<double>();
        c.strategy    = detail::enum_field<BenchStrategy>(j, "strategy", bench_strategy_from_string);
        c.n           = j.at("n").get<int>();
        c.k           = j.at("k").get<int>();
        c.rho         = j.at("rho").get<double>();
        c.seed        = j.at("seed").get<std::uint64_t>();
        c.aggregation = detail::enum_field<Aggregation>(j, "aggregation", aggregation_from_string);
        c.size        = {j.at("width").get<int>(), j.at("height").get<int>()};
        return c;
    });
}

inline std::string config_digest(const BenchConfig & c) { return sha256_hex(to_json(c.normalized()).dump()); }

// ---------------------------------------------------------------------------
// Statistics

struct Interval {
    double low  = 0.0;
    double high = 0.0;

    bool contains(double x) const { return x >= low && x <= high; }
    bool overlaps(const Interval & o) const { return low <= o.high && o.low <= high; }
    bool operator==(const Interval &) const = default;
};

// Wilson score interval for a proportion; z = 1.96 gives 95%.
inline Interval wilson_interval(double p, double n, double z = 1.959963984540054) {
    if (n <= 0.0) {
        return {0.0, 1.0};
    }
    const double z2     = z * z;
    const double denom  = 1.0 + z2 / n;
    const double center = (p + z2 / (2.0 * n)) / denom;
    const double half   = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
    // rounding can push a bound past p at the edges (p = 0 or 1)
    return {std::clamp(center - half, 0.0, p), std::clamp(center + half, p, 1.0)};
}

// ---------------------------------------------------------------------------
// Suite

struct SuiteItem {
    std::size_t index = 0;
    TaskSpec spec;
    std::uint64_t seed = 0;  // base seed for this prompt's generation
};

inline std::vector<SuiteItem> build_suite(const BenchConfig & cfg) {
    cfg.validate();
    std::vector<SuiteItem> suite;
    for (const CategoryCount & cc : cfg.counts) {
        for (int j = 0; j < cc.count; ++j) {
            const std::size_t index = suite.size();
            const TaskSpec spec     = random_task_spec(
                cc.category, derive_seed(cfg.seed, Stream::suite, static_cast<std::uint64_t>(cc.category), j), cfg.size);
            suite.push_back({index, spec, prompt_seed(cfg.seed, index)});
        }
    }
    return suite;
}

// ---------------------------------------------------------------------------
// Running

struct PromptResult {
    std::size_t index = 0;
    Category category{};
    std::string prompt;
    std::uint64_t seed = 0;
    std::vector<double> scores;         // per candidate; empty for strategy none
    std::vector<std::size_t> selected;  // ranked candidate indices
    bool top1_pass      = false;
    double topk_pass    = 0.0;  // fraction of selected candidates passing

    bool operator==(const PromptResult &) const = default;
};

struct CategoryResult {
    Category category{};
    int n              = 0;
    int top1_passes    = 0;
    double top1_rate   = 0.0;
    double mean_topk   = 0.0;
    double rate        = 0.0;  // by the configured aggregation
    Interval ci;

    bool operator==(const CategoryResult &) const = default;
};

struct BenchReport {
    BenchConfig config;
    std::string config_digest;
    std::vector<CategoryResult> categories;
    double overall = 0.0;  // unweighted mean of category rates
    Interval overall_ci;
    double overall_top1      = 0.0;
    double overall_mean_topk = 0.0;
    std::vector<PromptResult> prompts;
    double runtime_seconds = 0.0;  // wall clock; not serialized

    int total_prompts() const { return static_cast<int>(prompts.size()); }

    friend bool operator==(const BenchReport & a, const BenchReport & b) {
        return to_json(a.config) == to_json(b.config) && a.config_digest == b.config_digest &&
               a.categories == b.categories && a.overall == b.overall && a.overall_ci == b.overall_ci &&
               a.overall_top1 == b.overall_top1 && a.overall_mean_topk == b.overall_mean_topk &&
               a.prompts == b.prompts;
    }
};

template <TokenPredictor P>
PromptResult run_prompt(const P & predictor, const SuiteItem & item, const BenchConfig & cfg) {
    PromptResult r{item.index, item.spec.category, render_prompt(item.spec), item.seed, {}, {}, false, 0.0};
    auto passes = [&](const TokenGrid & g) { return oracle_check(grid_to_scene(g), item.spec).pass; };

    if (cfg.strategy == BenchStrategy::none) {
        const TokenGrid g = decode_iterative(predictor, item.spec, cfg.steps, cfg.scale, candidate_seed(item.seed, 0));
        r.selected        = {0};
        r.top1_pass       = passes(g);
        r.topk_pass       = r.top1_pass ? 1.0 : 0.0;
        return r;
    }
    const auto strategy = static_cast<Strategy>(static_cast<int>(cfg.strategy) - 1);
    CandidateSet set    = generate_candidates(predictor, item.spec, cfg.n, cfg.steps, cfg.scale, item.seed);
    set = score_candidates(std::move(set), strategy, AnswererConfig{cfg.rho}, derive_seed(item.seed, Stream::verify));
    const Selection sel = top_k(set, static_cast<std::size_t>(cfg.k), derive_seed(item.seed, Stream::tie));
    r.scores            = set.scores();
    r.selected          = sel.ranked;
    r.top1_pass         = passes(set.candidates[sel.ranked.front()].grid);
    int ok              = 0;
    for (std::size_t idx : sel.ranked) {
        ok += passes(set.candidates[idx].grid) ? 1 : 0;
    }
    r.topk_pass = static_cast<double>(ok) / static_cast<double>(sel.ranked.size());
    return r;
}

namespace detail {

inline void aggregate(BenchReport & report) {
    const BenchConfig & cfg = report.config;
    report.categories.clear();
    int total = 0;
    for (const CategoryCount & cc : cfg.counts) {
        CategoryResult cr{cc.category, 0, 0, 0.0, 0.0, 0.0, {}};
        double topk_sum = 0.0;
        for (const PromptResult & p : report.prompts) {
            if (p.category != cc.category) {
                continue;
            }
            ++cr.n;
            cr.top1_passes += p.top1_pass ? 1 : 0;
            topk_sum += p.topk_pass;
        }
        cr.top1_rate = static_cast<double>(cr.top1_passes) / cr.n;
        cr.mean_topk = topk_sum / cr.n;
        cr.rate      = cfg.aggregation == Aggregation::top1 ? cr.top1_rate : cr.mean_topk;
        cr.ci        = wilson_interval(cr.rate, cr.n);
        total += cr.n;
        report.categories.push_back(cr);
    }
    double sum = 0.0, sum_top1 = 0.0, sum_topk = 0.0;
    for (const CategoryResult & cr : report.categories) {
        sum += cr.rate;
        sum_top1 += cr.top1_rate;
        sum_topk += cr.mean_topk;
    }
    const auto m             = static_cast<double>(report.categories.size());
    report.overall           = sum / m;
    report.overall_top1      = sum_top1 / m;
    report.overall_mean_topk = sum_topk / m;
    report.overall_ci        = wilson_interval(report.overall, total);
}

}  // namespace detail

template <TokenPredictor P>
BenchReport run_bench(const P & predictor, const BenchConfig & config) {
    const auto start = std::chrono::steady_clock::now();
    const BenchConfig cfg = config.normalized();
    const auto suite      = build_suite(cfg);
    BenchReport report;
    report.config        = cfg;
    report.config_digest = config_digest(cfg);
    report.prompts.resize(suite.size());
    parallel_for(suite.size(), cfg.jobs,
                 [&](std::size_t i) { report.prompts[i] = run_prompt(predictor, suite[i], cfg); });
    detail::aggregate(report);
    report.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

inline BenchReport run_bench(const BenchConfig & config) {
    const BenchConfig cfg = config.normalized();
    return run_bench(PlantedPredictor(cfg.generator, cfg.size), cfg);
}

// ---------------------------------------------------------------------------
// Serialization

inline json to_json(const Interval & i) { return json::array({i.low, i.high}); }

inline json to_json(const BenchReport & r) {
    json cats = json::array();
    for (const CategoryResult & c : r.categories) {
        cats.push_back({{"category", to_string(c.category)},
                        {"n", c.n},
                        {"top1_passes", c.top1_passes},
                        {"top1_rate", c.top1_rate},
                        {"mean_topk", c.mean_topk},
                        {"rate", c.rate},
                        {"ci", to_json(c.ci)}});
    }
    json prompts = json::array();
    for (const PromptResult & p : r.prompts) {
        prompts.push_back({{"index", p.index},
                           {"category", to_string(p.category)},
                           {"prompt", p.prompt},
                           {"seed", p.seed},
                           {"scores", p.scores},
                           {"selected", p.selected},
                           {"top1_pass", p.top1_pass},
                           {"topk_pass", p.topk_pass}});
    }
    return json{{"config", to_json(r.config)},
                {"config_digest", r.config_digest},
                {"categories", cats},
                {"overall", r.overall},
                {"overall_ci", to_json(r.overall_ci)},
                {"overall_top1", r.overall_top1},
                {"overall_mean_topk", r.overall_mean_topk},
                {"prompts", prompts}};
}

inline BenchReport bench_report_from_json(const json & j) {
    return detail::schema_guard("bench report", [&] {
        auto interval = [](const json & a) { return Interval{a.at(0).get<double>(), a.at(1).get<double>()}; };
        BenchReport r;
        r.config        = bench_config_from_json(j.at("config"));
        r.config_digest = j.at("config_digest").get<std::string>();
        for (const json & c : j.at("categories")) {
            r.categories.push_back({detail::enum_field<Category>(c, "category", category_from_string),
                                    c.at("n").get<int>(), c.at("top1_passes").get<int>(),
                                    c.at("top1_rate").get<double>(), c.at("mean_topk").get<double>(),
                                    c.at("rate").get<double>(), interval(c.at("ci"))});
        }
        r.overall           = j.at("overall").get<double>();
        r.overall_ci        = interval(j.at("overall_ci"));
        r.overall_top1      = j.at("overall_top1").get<double>();
        r.overall_mean_topk = j.at("overall_mean_topk").get<double>();
        for (const json & p : j.at("prompts")) {
            r.prompts.push_back({p.at("index").get<std::size_t>(),
                                 detail::enum_field<Category>(p, "category", category_from_string),
                                 p.at("prompt").get<std::string>(), p.at("seed").get<std::uint64_t>(),
                                 p.at("scores").get<std::vector<double>>(),
                                 p.at("selected").get<std::vector<std::size_t>>(), p.at("top1_pass").get<bool>(),
                                 p.at("topk_pass").get<double>()});
        }
        return r;
    });
}

inline std::string report_json_text(const BenchReport & r) { return to_json(r).dump(2) + "\n"; }

inline std::string report_csv(const BenchReport & r) {
    std::ostringstream out;
    out << std::setprecision(17);
    out << "category,n,rate,ci_low,ci_high,top1_rate,mean_topk\n";
    int total = 0;
    for (const CategoryResult & c : r.categories) {
        out << to_string(c.category) << ',' << c.n << ',' << c.rate << ',' << c.ci.low << ',' << c.ci.high << ','
            << c.top1_rate << ',' << c.mean_topk << '\n';
        total += c.n;
    }
    out << "overall," << total << ',' << r.overall << ',' << r.overall_ci.low << ',' << r.overall_ci.high << ','
        << r.overall_top1 << ',' << r.overall_mean_topk << '\n';
    return out.str();
}

// Grouped bar chart of per-category rates, one bar series per report.
inline std::string comparison_svg(std::span<const BenchReport> reports) {
    if (reports.empty()) {
        throw InvalidArgument("nothing to plot");
    }
    constexpr std::array<std::string_view, 6> palette{"#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948"};
    std::vector<std::string> labels;
    for (const CategoryResult & c : reports.front().categories) {
        labels.emplace_back(to_string(c.category));
    }
    labels.emplace_back("overall");
    const double group_w = 24.0 * static_cast<double>(reports.size()) + 20.0;
    const double width   = 80.0 + group_w * static_cast<double>(labels.size());
    const double height  = 320.0, top = 20.0, plot_h = 220.0;
    std::ostringstream svg;
    svg << std::fixed << std::setprecision(2);
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n";
    svg << "<line x1=\"60\" y1=\"" << top + plot_h << "\" x2=\"" << width - 10 << "\" y2=\"" << top + plot_h
        << "\" stroke=\"black\"/>\n";
    for (int tick = 0; tick <= 4; ++tick) {
        const double y = top + plot_h * (1.0 - tick / 4.0);
        svg << "<text x=\"55\" y=\"" << y + 4 << "\" font-size=\"10\" text-anchor=\"end\">" << tick / 4.0
            << "</text>\n";
    }
    for (std::size_t g = 0; g < labels.size(); ++g) {
        const double x0 = 70.0 + group_w * static_cast<double>(g);
        for (std::size_t s = 0; s < reports.size(); ++s) {
            const BenchReport & r = reports[s];
            double v              = r.overall;
            if (g < r.categories.size()) {
                v = r.categories[g].rate;
            }
            const double h = plot_h * v;
            svg << "<rect x=\"" << x0 + 24.0 * static_cast<double>(s) << "\" y=\"" << top + plot_h - h
                << "\" width=\"20\" height=\"" << h << "\" fill=\"" << palette[s % palette.size()] << "\"/>\n";
        }
        svg << "<text x=\"" << x0 + group_w / 2 - 10 << "\" y=\"" << top + plot_h + 16
            << "\" font-size=\"10\" text-anchor=\"middle\">" << labels[g] << "</text>\n";
    }
    for (std::size_t s = 0; s < reports.size(); ++s) {
        const double y = top + plot_h + 36 + 14.0 * static_cast<double>(s);
        svg << "<rect x=\"70\" y=\"" << y - 9 << "\" width=\"10\" height=\"10\" fill=\""
            << palette[s % palette.size()] << "\"/>";
        svg << "<text x=\"85\" y=\"" << y << "\" font-size=\"10\">" << to_string(reports[s].config.strategy)
            << " (N=" << reports[s].config.n << ", rho=" << reports[s].config.rho << ")</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

enum class ReportFormat : std::uint8_t { csv, json, svg };

// Writes <stem>.csv / <stem>.json / <stem>.svg into `dir`; returns the paths.
inline std::vector<std::string> emit_report(const BenchReport & report, const std::string & dir,
                                            std::span<const ReportFormat> formats, const std::string & stem = "report") {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw IoFailure("cannot create output directory '" + dir + "': " + ec.message());
    }
    std::vector<std::string> written;
    for (ReportFormat f : formats) {
        std::string path = (std::filesystem::path(dir) / stem).string();
        switch (f) {
            case ReportFormat::csv:
                path += ".csv";
                write_text_file(path, report_csv(report));
                break;
            case ReportFormat::json:
                path += ".json";
                write_text_file(path, report_json_text(report));
                break;
            case ReportFormat::svg:
                path += ".svg";
                write_text_file(path, comparison_svg(std::span<const BenchReport>(&report, 1)));
                break;
        }
        written.push_back(path);
    }
    return written;
}

}  // namespace maskverify
