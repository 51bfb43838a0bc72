#pragma once

// Command-line front end: one binary, one subcommand per pipeline stage.
// Every subcommand writes its artifacts plus manifest.json into --out-dir.
//
// Exit codes: 0 success, 1 domain error (JSON message on stderr), 2 usage.

#include "maskverify/bench.hpp"
#include "maskverify/digest.hpp"
#include "maskverify/errors.hpp"
#include "maskverify/generator.hpp"
#include "maskverify/json_io.hpp"
#include "maskverify/preference.hpp"
#include "maskverify/prompt.hpp"
#include "maskverify/selector.hpp"
#include "maskverify/verifier.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace maskverify::cli {

inline constexpr std::string_view tool_name    = "maskverify";
inline constexpr std::string_view tool_version = "0.1.0";

struct FileDigest {
    std::string path;
    std::string sha256;

    bool operator==(const FileDigest &) const = default;
};

struct RunManifest {
    std::string command;
    json config = json::object();  // resolved option values, replayable
    std::uint64_t seed = 0;
    unsigned jobs      = 1;
    std::string out_dir;
    std::vector<FileDigest> inputs;
    std::vector<FileDigest> outputs;
    json summary = json::object();
    double wall_clock_seconds = 0.0;
};

inline json to_json(const RunManifest & m) {
    auto files = [](const std::vector<FileDigest> & fs) {
        json a = json::array();
        for (const FileDigest & f : fs) {
            a.push_back({{"path", f.path}, {"sha256", f.sha256}});
        }
        return a;
    };
    return json{{"tool", tool_name},
                {"version", tool_version},
                {"command", m.command},
                {"config", m.config},
                {"seed", m.seed},
                {"jobs", m.jobs},
                {"out_dir", m.out_dir},
                {"inputs", files(m.inputs)},
                {"outputs", files(m.outputs)},
                {"summary", m.summary},
                {"wall_clock_seconds", m.wall_clock_seconds}};
}

inline FileDigest digest_file(const std::string & path) { return {path, sha256_hex(read_text_file(path))}; }

// Argument list (without the program name) that re-runs a manifest's command
// with its recorded configuration, writing into `out_dir`.
inline std::vector<std::string> replay_arguments(const json & manifest, const std::string & out_dir) {
    std::vector<std::string> args{manifest.at("command").get<std::string>()};
    for (const auto & [name, value] : manifest.at("config").items()) {
        if (value.is_boolean()) {
            if (value.get<bool>()) {
                args.push_back("--" + name);
            }
        } else if (value.is_array()) {
            if (!value.empty()) {
                args.push_back("--" + name);
                for (const json & v : value) {
                    args.push_back(v.get<std::string>());
                }
            }
        } else {
            args.push_back("--" + name);
            args.push_back(value.get<std::string>());
        }
    }
    args.push_back("--out-dir");
    args.push_back(out_dir);
    args.push_back("--jobs");
    args.push_back(std::to_string(manifest.at("jobs").get<unsigned>()));
    return args;
}

namespace detail {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct GeneratorFlags {
    int steps          = default_steps;
    double cfg_scale   = default_cfg_scale;
    double epsilon     = 0.3;
    double temperature = 0.25;

    PlantedPredictorConfig predictor() const {
        PlantedPredictorConfig c;
        c.epsilon     = epsilon;
        c.temperature = temperature;
        return c;
    }
};

struct Options {
    std::string out_dir;
    unsigned jobs      = 1;
    std::uint64_t seed = 0;
    GeneratorFlags gen;

    std::string prompt;
    std::string spec_file;
    std::string grid_file;
    std::string strategy = "cot";
    double rho           = 0.0;
    int n                = default_candidates;
    int k                = default_top_k;

    std::string prompts_file;
    int random_specs = 0;
    std::vector<std::string> categories;
    int n_per_prompt = default_images_per_prompt;

    std::string pairs_file;
    bool include_long = false;

    int per_category = 100;
    std::vector<std::string> counts;
    std::string aggregation = "top1";
    std::vector<std::string> formats{"csv", "json"};

    std::vector<std::string> inputs;
};

inline void add_common(CLI::App * sub, Options & o) {
    sub->add_option("--out-dir", o.out_dir, "Directory for artifacts and manifest.json")
        ->envname("MASKVERIFY_OUT_DIR")
        ->required();
    sub->add_option("--jobs", o.jobs, "Worker threads; results do not depend on it")
        ->envname("MASKVERIFY_JOBS")
        ->check(CLI::PositiveNumber);
}

inline void add_seed(CLI::App * sub, Options & o) {
    sub->add_option("--seed", o.seed, "Base seed; all randomness derives from it");
}

inline void add_generator(CLI::App * sub, Options & o) {
    sub->add_option("--steps", o.gen.steps, "Decoding iterations T")->check(CLI::PositiveNumber);
    sub->add_option("--cfg-scale", o.gen.cfg_scale, "Classifier-free guidance scale");
    sub->add_option("--epsilon", o.gen.epsilon, "Planted predictor corruption probability")->check(CLI::Range(0.0, 1.0));
    sub->add_option("--temperature", o.gen.temperature, "Planted predictor logit temperature")
        ->check(CLI::PositiveNumber);
}

inline void add_target(CLI::App * sub, Options & o) {
    auto * p = sub->add_option("--prompt", o.prompt, "Prompt in the micro-world grammar");
    auto * s = sub->add_option("--spec", o.spec_file, "TaskSpec JSON file")->check(CLI::ExistingFile);
    p->excludes(s);
    s->excludes(p);
}

inline void add_verifier(CLI::App * sub, Options & o) {
    sub->add_option("--strategy", o.strategy, "Verification strategy")
        ->check(CLI::IsMember({"outcome", "rule", "cot"}));
    sub->add_option("--rho", o.rho, "Answerer flip rate")->check(CLI::Range(0.0, 1.0));
}

inline TaskSpec load_target(const Options & o, RunManifest & m) {
    if (!o.spec_file.empty()) {
        m.inputs.push_back(digest_file(o.spec_file));
        return spec_from_json(read_json_file(o.spec_file));
    }
    if (o.prompt.empty()) {
        throw UsageError("one of --prompt or --spec is required");
    }
    return parse_prompt(o.prompt);
}

inline Strategy strategy_of(const Options & o) { return *strategy_from_string(o.strategy); }

// Resolved option values of `sub`, skipping plumbing flags.
inline json resolved_config(const CLI::App & sub) {
    static const std::set<std::string> skip{"help", "out-dir", "jobs", "config"};
    json cfg = json::object();
    for (const CLI::Option * opt : sub.get_options()) {
        if (opt->get_lnames().empty()) {
            continue;
        }
        const std::string name = opt->get_lnames().front();
        if (skip.contains(name)) {
            continue;
        }
        if (opt->get_type_size() == 0) {
            cfg[name] = opt->count() > 0 && opt->as<bool>();
        } else if (opt->get_expected_max() > 1) {
            std::vector<std::string> values;
            if (opt->count() > 0) {
                values = opt->as<std::vector<std::string>>();
            } else {
                // defaults render as "[a,b]"; an empty vector as "{}"
                std::string d = opt->get_default_str();
                std::erase_if(d, [](char c) { return c == '[' || c == ']' || c == '{' || c == '}' || c == ' '; });
                std::stringstream ss(d);
                for (std::string item; std::getline(ss, item, ',');) {
                    values.push_back(item);
                }
            }
            cfg[name] = values;
        } else if (opt->count() > 0) {
            cfg[name] = opt->results().back();
        } else if (!opt->get_default_str().empty()) {
            cfg[name] = opt->get_default_str();
        }
    }
    return cfg;
}

inline std::string out_path(const RunManifest & m, const std::string & file) {
    return (std::filesystem::path(m.out_dir) / file).string();
}

inline void emit(RunManifest & m, const std::string & file, const std::string & text) {
    const std::string path = out_path(m, file);
    write_text_file(path, text);
    m.outputs.push_back({path, sha256_hex(text)});
}

inline json verdict_json(const Verdict & v, const TaskSpec & spec) {
    json qs = json::array();
    if (v.strategy != Strategy::outcome) {
        for (const AtomicQuestion & q : decompose(spec)) {
            qs.push_back(q.text);
        }
    }
    json answers = json::array();
    for (Answer a : v.answers) {
        answers.push_back(to_string(a));
    }
    return json{{"strategy", to_string(v.strategy)},
                {"score", v.score},
                {"questions", qs},
                {"answers", answers},
                {"transcript", v.transcript ? json(v.transcript->raw) : json(nullptr)}};
}

// ---------------------------------------------------------------------------
// Subcommands

inline void cmd_generate(const Options & o, RunManifest & m, std::ostream & out) {
    const TaskSpec spec = load_target(o, m);
    const TokenGrid g =
        decode_iterative(PlantedPredictor(o.gen.predictor()), spec, o.gen.steps, o.gen.cfg_scale, o.seed);
    emit(m, "grid.json", json(g).dump() + "\n");
    m.summary = {{"prompt", render_prompt(spec)}, {"oracle_pass", oracle_check(grid_to_scene(g), spec).pass}};
    out << m.outputs.back().path << '\n';
}

inline void cmd_verify(const Options & o, RunManifest & m, std::ostream & out) {
    const TaskSpec spec = load_target(o, m);
    m.inputs.push_back(digest_file(o.grid_file));
    const TokenGrid g = grid_from_json(read_json_file(o.grid_file));
    const Verdict v   = verify(strategy_of(o), g, spec, AnswererConfig{o.rho}, o.seed);
    json rec          = verdict_json(v, spec);
    rec["prompt"]     = render_prompt(spec);
    emit(m, "verdict.json", rec.dump(2) + "\n");
    m.summary = {{"score", v.score}};
    out << "score " << v.score << '\n';
}

inline void cmd_select(const Options & o, RunManifest & m, std::ostream & out) {
    const TaskSpec spec = load_target(o, m);
    const Strategy strategy = strategy_of(o);
    CandidateSet set = generate_candidates(PlantedPredictor(o.gen.predictor()), spec, o.n, o.gen.steps,
                                           o.gen.cfg_scale, o.seed, o.jobs);
    set = score_candidates(std::move(set), strategy, AnswererConfig{o.rho}, derive_seed(o.seed, Stream::verify), o.jobs);
    const Selection sel = top_k(set, static_cast<std::size_t>(o.k), derive_seed(o.seed, Stream::tie));

    json cands = json::array();
    for (std::size_t i = 0; i < set.candidates.size(); ++i) {
        json c = verdict_json(set.verdicts[i], spec);
        c.erase("questions");
        c["index"] = i;
        c["seed"]  = set.candidates[i].seed;
        c["grid"]  = set.candidates[i].grid;
        cands.push_back(std::move(c));
    }
    json rec{{"prompt", render_prompt(spec)},
             {"spec", spec},
             {"strategy", to_string(strategy)},
             {"n", o.n},
             {"k", o.k},
             {"rho", o.rho},
             {"seed", o.seed},
             {"config_digest", sha256_hex(m.config.dump())},
             {"ranked", sel.ranked},
             {"ranked_scores", sel.ranked_scores},
             {"tie_groups", sel.tie_groups},
             {"candidates", cands}};
    emit(m, "selection.json", rec.dump(2) + "\n");
    m.summary = {{"ranked", sel.ranked}, {"ranked_scores", sel.ranked_scores}};
    out << "ranked";
    for (std::size_t i : sel.ranked) {
        out << ' ' << i;
    }
    out << '\n';
}

inline std::vector<TaskSpec> dpo_specs(const Options & o, RunManifest & m) {
    std::vector<TaskSpec> specs;
    if (!o.prompts_file.empty()) {
        m.inputs.push_back(digest_file(o.prompts_file));
        std::stringstream ss(read_text_file(o.prompts_file));
        for (std::string line; std::getline(ss, line);) {
            if (line.find_first_not_of(" \t\r") == std::string::npos || line.front() == '#') {
                continue;
            }
            specs.push_back(parse_prompt(line));
        }
        return specs;
    }
    if (o.random_specs < 1) {
        throw UsageError("one of --prompts or --random-specs is required");
    }
    std::vector<Category> cats;
    for (const std::string & c : o.categories) {
        cats.push_back(*category_from_string(c));
    }
    if (cats.empty()) {
        cats.assign(geneval_categories.begin(), geneval_categories.end());
    }
    for (int i = 0; i < o.random_specs; ++i) {
        specs.push_back(random_task_spec(cats[static_cast<std::size_t>(i) % cats.size()],
                                         derive_seed(o.seed, Stream::suite, i)));
    }
    return specs;
}

inline void cmd_build_dpo(const Options & o, RunManifest & m, std::ostream & out) {
    const auto specs = dpo_specs(o, m);
    PairBuildConfig cfg;
    cfg.n_per_prompt = o.n_per_prompt;
    cfg.strategy     = strategy_of(o);
    cfg.answerer     = AnswererConfig{o.rho};
    cfg.steps        = o.gen.steps;
    cfg.scale        = o.gen.cfg_scale;
    cfg.seed         = o.seed;
    cfg.jobs         = o.jobs;
    const PairBuildResult res = build_pairs(specs, PlantedPredictor(o.gen.predictor()), cfg);
    emit(m, "pairs.jsonl", to_jsonl(std::span<const PreferencePair>(res.pairs)));
    m.summary = {{"specs", specs.size()},
                 {"pairs", res.pairs.size()},
                 {"skipped", res.skipped.size()},
                 {"skipped_indices", res.skipped},
                 {"epsilon", o.gen.epsilon},
                 {"rho", o.rho},
                 {"strategy", o.strategy}};
    out << res.pairs.size() << " pairs, " << res.skipped.size() << " skipped\n";
}

inline void cmd_cot_labels(const Options & o, RunManifest & m, std::ostream & out) {
    m.inputs.push_back(digest_file(o.pairs_file));
    const auto pairs = pairs_from_jsonl(read_text_file(o.pairs_file));
    CotLabelConfig cfg{AnswererConfig{o.rho}, o.seed, o.include_long};
    const auto records = build_cot_labels(pairs, cfg);
    emit(m, "cot_labels.jsonl", to_jsonl(std::span<const CotLabelRecord>(records)));
    m.summary = {{"pairs", pairs.size()}, {"records", records.size()}};
    out << records.size() << " records\n";
}

inline BenchConfig bench_config(const Options & o) {
    BenchConfig c;
    c.counts = BenchConfig::default_counts(o.per_category);
    if (!o.counts.empty()) {
        c.counts.clear();
        for (const std::string & item : o.counts) {
            const auto eq  = item.find('=');
            const auto cat = eq == std::string::npos ? std::nullopt : category_from_string(item.substr(0, eq));
            if (!cat) {
                throw UsageError("--counts expects category=count, got '" + item + "'");
            }
            try {
                c.counts.push_back({*cat, std::stoi(item.substr(eq + 1))});
            } catch (const std::exception &) {
                throw UsageError("--counts expects category=count, got '" + item + "'");
            }
        }
    }
    c.generator   = o.gen.predictor();
    c.steps       = o.gen.steps;
    c.scale       = o.gen.cfg_scale;
    c.strategy    = *bench_strategy_from_string(o.strategy);
    c.n           = o.n;
    c.k           = o.k;
    c.rho         = o.rho;
    c.seed        = o.seed;
    c.aggregation = *aggregation_from_string(o.aggregation);
    c.jobs        = o.jobs;
    return c;
}

inline void cmd_bench(const Options & o, RunManifest & m, std::ostream & out) {
    const BenchReport report = run_bench(bench_config(o));
    for (const std::string & f : o.formats) {
        if (f == "csv") {
            emit(m, "report.csv", report_csv(report));
        } else if (f == "json") {
            emit(m, "report.json", report_json_text(report));
        } else {
            emit(m, "report.svg", comparison_svg(std::span<const BenchReport>(&report, 1)));
        }
    }
    m.summary = {{"overall", report.overall},
                 {"overall_ci", to_json(report.overall_ci)},
                 {"overall_top1", report.overall_top1},
                 {"overall_mean_topk", report.overall_mean_topk},
                 {"config_digest", report.config_digest},
                 {"runtime_seconds", report.runtime_seconds}};
    out << "overall " << report.overall << " [" << report.overall_ci.low << ", " << report.overall_ci.high << "]\n";
}

inline void cmd_report(const Options & o, RunManifest & m, std::ostream & out) {
    std::vector<BenchReport> reports;
    for (const std::string & path : o.inputs) {
        m.inputs.push_back(digest_file(path));
        reports.push_back(bench_report_from_json(read_json_file(path)));
    }
    std::ostringstream csv;
    csv << std::setprecision(17);
    csv << "input,strategy,n,k,rho,aggregation,category,rate,ci_low,ci_high\n";
    for (std::size_t i = 0; i < reports.size(); ++i) {
        const BenchReport & r = reports[i];
        auto row              = [&](std::string_view cat, double rate, const Interval & ci) {
            csv << i << ',' << to_string(r.config.strategy) << ',' << r.config.n << ',' << r.config.k << ','
                << r.config.rho << ',' << to_string(r.config.aggregation) << ',' << cat << ',' << rate << ','
                << ci.low << ',' << ci.high << '\n';
        };
        for (const CategoryResult & c : r.categories) {
            row(to_string(c.category), c.rate, c.ci);
        }
        row("overall", r.overall, r.overall_ci);
    }
    emit(m, "comparison.csv", csv.str());
    emit(m, "comparison.svg", comparison_svg(reports));
    m.summary = {{"reports", reports.size()}};
    out << m.outputs.front().path << '\n';
}

}  // namespace detail

// Runs one command line. `args` excludes the program name.
inline int run_command(const std::vector<std::string> & args, std::ostream & out = std::cout,
                       std::ostream & err = std::cerr) {
    using namespace detail;
    Options o;
    CLI::App app{"Masked-token generation, self-verification and preference data over a synthetic micro-world",
                 std::string(tool_name)};
    app.set_version_flag("--version", std::string(tool_version));
    app.set_config("--config", "", "TOML config file; keys under [<subcommand>] sections, flags win");
    app.allow_config_extras(CLI::config_extras_mode::error);
    app.require_subcommand(1);
    app.fallthrough();
    app.option_defaults()->always_capture_default();

    std::vector<std::pair<CLI::App *, std::function<void(const Options &, RunManifest &, std::ostream &)>>> cmds;

    auto * gen = app.add_subcommand("generate", "Decode one grid for a prompt");
    add_target(gen, o);
    add_seed(gen, o);
    add_generator(gen, o);
    cmds.emplace_back(gen, cmd_generate);

    auto * ver = app.add_subcommand("verify", "Score a grid against a prompt with one verification strategy");
    ver->add_option("--grid", o.grid_file, "TokenGrid JSON file")->required()->check(CLI::ExistingFile);
    add_target(ver, o);
    add_verifier(ver, o);
    add_seed(ver, o);
    cmds.emplace_back(ver, cmd_verify);

    auto * sel = app.add_subcommand("select", "Best-of-N: decode N candidates, verify, keep the top K");
    add_target(sel, o);
    add_verifier(sel, o);
    sel->add_option("--n", o.n, "Candidates per prompt")->check(CLI::PositiveNumber);
    sel->add_option("--k", o.k, "Candidates kept")->check(CLI::PositiveNumber);
    add_seed(sel, o);
    add_generator(sel, o);
    cmds.emplace_back(sel, cmd_select);

    std::vector<std::string> category_names;
    for (Category c : all_categories) {
        category_names.emplace_back(to_string(c));
    }

    auto * dpo = app.add_subcommand("build-dpo", "Build best/worst preference pairs per prompt");
    auto * pf  = dpo->add_option("--prompts", o.prompts_file, "File with one prompt per line")->check(CLI::ExistingFile);
    auto * rs  = dpo->add_option("--random-specs", o.random_specs, "Sample this many specs instead of --prompts")
                    ->check(CLI::PositiveNumber);
    pf->excludes(rs);
    rs->excludes(pf);
    dpo->add_option("--categories", o.categories, "Categories for --random-specs, round robin")
        ->check(CLI::IsMember(category_names));
    dpo->add_option("--n-per-prompt", o.n_per_prompt, "Images generated per prompt")->check(CLI::Range(2, 1 << 20));
    add_verifier(dpo, o);
    add_seed(dpo, o);
    add_generator(dpo, o);
    cmds.emplace_back(dpo, cmd_build_dpo);

    auto * cot = app.add_subcommand("cot-labels", "Emit chain-of-thought transcripts for every grid of every pair");
    cot->add_option("--pairs", o.pairs_file, "pairs.jsonl from build-dpo")->required()->check(CLI::ExistingFile);
    cot->add_option("--rho", o.rho, "Answerer flip rate")->check(CLI::Range(0.0, 1.0));
    cot->add_flag("--include-long", o.include_long, "Keep long_compositional pairs");
    add_seed(cot, o);
    cmds.emplace_back(cot, cmd_cot_labels);

    auto * bench = app.add_subcommand("bench", "Run the category benchmark for one strategy");
    bench->add_option("--per-category", o.per_category, "Prompts per GenEval category")->check(CLI::PositiveNumber);
    bench->add_option("--counts", o.counts, "Explicit category=count entries (overrides --per-category)");
    bench->add_option("--strategy", o.strategy, "Test-time strategy")
        ->check(CLI::IsMember({"none", "outcome", "rule", "cot"}));
    bench->add_option("--rho", o.rho, "Answerer flip rate")->check(CLI::Range(0.0, 1.0));
    bench->add_option("--n", o.n, "Candidates per prompt (forced to 1 for none)")->check(CLI::PositiveNumber);
    bench->add_option("--k", o.k, "Candidates kept")->check(CLI::PositiveNumber);
    bench->add_option("--aggregation", o.aggregation, "Scoring of the kept candidates")
        ->check(CLI::IsMember({"top1", "mean_topk"}));
    bench->add_option("--format", o.formats, "Report formats")->check(CLI::IsMember({"csv", "json", "svg"}));
    add_seed(bench, o);
    add_generator(bench, o);
    cmds.emplace_back(bench, cmd_bench);

    auto * rep = app.add_subcommand("report", "Combine bench JSON reports into a CSV table and an SVG chart");
    rep->add_option("--input", o.inputs, "report.json files")->required()->check(CLI::ExistingFile);
    cmds.emplace_back(rep, cmd_report);

    for (auto & [sub, fn] : cmds) {
        add_common(sub, o);
    }

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError & e) {
        app.exit(e, out, err);
        return e.get_exit_code() == 0 ? 0 : 2;
    }

    for (auto & [sub, fn] : cmds) {
        if (!sub->parsed()) {
            continue;
        }
        const auto start = std::chrono::steady_clock::now();
        RunManifest m;
        m.command = sub->get_name();
        m.config  = resolved_config(*sub);
        m.seed    = o.seed;
        m.jobs    = o.jobs;
        m.out_dir = o.out_dir;
        try {
            std::error_code ec;
            std::filesystem::create_directories(o.out_dir, ec);
            if (ec) {
                throw IoFailure("cannot create output directory '" + o.out_dir + "': " + ec.message());
            }
            fn(o, m, out);
            m.wall_clock_seconds =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            write_text_file(out_path(m, "manifest.json"), to_json(m).dump(2) + "\n");
        } catch (const UsageError & e) {
            err << "usage error: " << e.what() << "\nRun with --help for more information.\n";
            return 2;
        } catch (const Error & e) {
            err << json{{"error", e.kind()}, {"message", e.what()}}.dump() << '\n';
            return 1;
        }
        return 0;
    }
    return 2;
}

inline int run_command(int argc, const char * const * argv, std::ostream & out = std::cout,
                       std::ostream & err = std::cerr) {
    return run_command(std::vector<std::string>(argv + 1, argv + argc), out, err);
}

}  // namespace maskverify::cli
