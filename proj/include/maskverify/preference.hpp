#pragma once

// Preference data for DPO: best/worst candidate pairs per prompt, the DPO loss
// with its closed-form gradient, and chain-of-thought label records for
// verifier post-training.

#include "maskverify/errors.hpp"
#include "maskverify/json_io.hpp"
#include "maskverify/parallel.hpp"
#include "maskverify/prompt.hpp"
#include "maskverify/selector.hpp"
#include "maskverify/verifier.hpp"

#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace maskverify {

inline constexpr int default_images_per_prompt = 20;

// ---------------------------------------------------------------------------
// Pair construction

struct ScoredGrid {
    TokenGrid grid;
    double score            = 0.0;
    std::size_t candidate   = 0;
    std::uint64_t seed      = 0;

    bool operator==(const ScoredGrid &) const = default;
};

struct PreferencePair {
    std::size_t spec_index = 0;
    TaskSpec spec;
    std::string prompt;
    ScoredGrid preferred;
    ScoredGrid rejected;
    Strategy strategy{};

    bool operator==(const PreferencePair &) const = default;
};

struct PairBuildConfig {
    int n_per_prompt = default_images_per_prompt;
    Strategy strategy = Strategy::cot;
    AnswererConfig answerer;
    int steps           = default_steps;
    double scale        = default_cfg_scale;
    std::uint64_t seed  = 0;
    unsigned jobs       = 1;
};

struct PairBuildResult {
    std::vector<PreferencePair> pairs;
    // Specs whose candidates all scored the same and so carry no preference.
    std::vector<std::size_t> skipped;
};

inline std::uint64_t prompt_seed(std::uint64_t seed, std::size_t index) {
    return derive_seed(seed, Stream::prompt, index);
}

// Per spec: decode n candidates, score them, pair the highest-scored
// (preferred) with the lowest-scored (rejected). Lowest index wins among equal
// extremes. Specs with max == min are skipped and reported.
template <TokenPredictor P>
PairBuildResult build_pairs(std::span<const TaskSpec> specs, const P & predictor, const PairBuildConfig & cfg) {
    if (cfg.n_per_prompt < 2) {
        throw InvalidArgument("preference pairs need at least two images per prompt");
    }
    std::vector<std::optional<PreferencePair>> slots(specs.size());
    parallel_for(specs.size(), cfg.jobs, [&](std::size_t i) {
        const std::uint64_t base = prompt_seed(cfg.seed, i);
        CandidateSet set = generate_candidates(predictor, specs[i], cfg.n_per_prompt, cfg.steps, cfg.scale, base);
        set              = score_candidates(std::move(set), cfg.strategy, cfg.answerer, derive_seed(base, Stream::verify));
        const auto scores = set.scores();
        const auto best   = static_cast<std::size_t>(std::max_element(scores.begin(), scores.end()) - scores.begin());
        const auto worst  = static_cast<std::size_t>(std::min_element(scores.begin(), scores.end()) - scores.begin());
        if (scores[best] == scores[worst]) {
            return;
        }
        const auto & c = set.candidates;
        slots[i]       = PreferencePair{i,
                                  specs[i],
                                  render_prompt(specs[i]),
                                  {c[best].grid, scores[best], best, c[best].seed},
                                  {c[worst].grid, scores[worst], worst, c[worst].seed},
                                  cfg.strategy};
    });
    PairBuildResult out;
    for (std::size_t i = 0; i < slots.size(); ++i) {
        if (slots[i]) {
            out.pairs.push_back(std::move(*slots[i]));
        } else {
            out.skipped.push_back(i);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// DPO loss

struct DpoInputs {
    double logp_dpo_w = 0.0;  // log pi_DPO(y_w | x)
    double logp_dpo_l = 0.0;  // log pi_DPO(y_l | x)
    double logp_sft_w = 0.0;  // log pi_SFT(y_w | x)
    double logp_sft_l = 0.0;  // log pi_SFT(y_l | x)
    double beta       = 0.1;

    // Log-ratio margin: (logp_dpo_w - logp_sft_w) - (logp_dpo_l - logp_sft_l).
    double margin() const { return (logp_dpo_w - logp_sft_w) - (logp_dpo_l - logp_sft_l); }
};

struct DpoGradient {
    double logp_dpo_w = 0.0;
    double logp_dpo_l = 0.0;
    double logp_sft_w = 0.0;
    double logp_sft_l = 0.0;
};

// log(1 + e^x) without overflow.
inline double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

inline double sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline void validate(const DpoInputs & in) {
    for (double v : {in.logp_dpo_w, in.logp_dpo_l, in.logp_sft_w, in.logp_sft_l, in.beta}) {
        if (!std::isfinite(v)) {
            throw NonFinite("DPO inputs must be finite");
        }
    }
    if (!(in.beta > 0.0)) {
        throw InvalidArgument("beta must be positive");
    }
    for (double v : {in.logp_dpo_w, in.logp_dpo_l, in.logp_sft_w, in.logp_sft_l}) {
        if (v > 0.0) {
            throw InvalidArgument("log-probabilities must be <= 0");
        }
    }
}

// -log sigmoid(beta * margin) = softplus(-beta * margin)
inline double dpo_loss(const DpoInputs & in) {
    validate(in);
    return softplus(-in.beta * in.margin());
}

// Mean loss over a collection of pairs.
inline double dpo_loss(std::span<const DpoInputs> batch) {
    if (batch.empty()) {
        throw InvalidArgument("empty DPO batch");
    }
    double sum = 0.0;
    for (const DpoInputs & in : batch) {
        sum += dpo_loss(in);
    }
    return sum / static_cast<double>(batch.size());
}

inline DpoGradient dpo_gradient(const DpoInputs & in) {
    validate(in);
    const double g = in.beta * sigmoid(-in.beta * in.margin());
    return {-g, g, g, -g};
}

// ---------------------------------------------------------------------------
// CoT labels

struct CotLabelRecord {
    std::size_t pair_index = 0;
    std::string role;  // "preferred" or "rejected"
    std::string prompt;
    TaskSpec spec;
    TokenGrid grid;
    std::string transcript;
    Answer final_answer = Answer::no;

    bool operator==(const CotLabelRecord &) const = default;
};

struct CotLabelConfig {
    AnswererConfig answerer;
    std::uint64_t seed = 0;
    // Long compositional prompts are left out of CoT data by default.
    bool include_long = false;
};

// One transcript per grid of every pair, answered by the (possibly noisy)
// answerer; final answer by the all-yes rule. Records are shuffled by seed.
inline std::vector<CotLabelRecord> build_cot_labels(std::span<const PreferencePair> pairs, const CotLabelConfig & cfg) {
    std::vector<CotLabelRecord> records;
    for (std::size_t p = 0; p < pairs.size(); ++p) {
        const PreferencePair & pair = pairs[p];
        if (pair.spec.category == Category::long_compositional && !cfg.include_long) {
            continue;
        }
        for (int role = 0; role < 2; ++role) {
            const ScoredGrid & sg = role == 0 ? pair.preferred : pair.rejected;
            const Verdict v = run_cot(sg.grid, pair.spec, cfg.answerer, derive_seed(cfg.seed, Stream::question, p, role));
            records.push_back({p, role == 0 ? "preferred" : "rejected", pair.prompt, pair.spec, sg.grid,
                               v.transcript->raw, v.transcript->final_answer});
        }
    }
    Rng rng(derive_seed(cfg.seed, Stream::shuffle));
    rng.shuffle(records);
    return records;
}

// ---------------------------------------------------------------------------
// Line-delimited JSON

inline json to_json(const ScoredGrid & g) {
    return json{{"grid", g.grid}, {"score", g.score}, {"candidate", g.candidate}, {"seed", g.seed}};
}

inline json to_json(const PreferencePair & p) {
    return json{{"spec_index", p.spec_index},        {"prompt", p.prompt},
                {"spec", p.spec},                    {"strategy", to_string(p.strategy)},
                {"preferred", to_json(p.preferred)}, {"rejected", to_json(p.rejected)}};
}

inline PreferencePair pair_from_json(const json & j) {
    return detail::schema_guard("preference pair", [&] {
        auto scored = [](const json & s) {
            return ScoredGrid{grid_from_json(s.at("grid")), s.at("score").get<double>(),
                              s.at("candidate").get<std::size_t>(), s.at("seed").get<std::uint64_t>()};
        };
        PreferencePair p{j.at("spec_index").get<std::size_t>(),
                         spec_from_json(j.at("spec")),
                         j.at("prompt").get<std::string>(),
                         scored(j.at("preferred")),
                         scored(j.at("rejected")),
                         detail::enum_field<Strategy>(j, "strategy", strategy_from_string)};
        if (!(p.preferred.score > p.rejected.score)) {
            throw SchemaError("preferred score must exceed rejected score");
        }
        return p;
    });
}

inline json to_json(const CotLabelRecord & r) {
    return json{{"pair_index", r.pair_index}, {"role", r.role},
                {"prompt", r.prompt},         {"spec", r.spec},
                {"grid", r.grid},             {"transcript", r.transcript},
                {"final", to_string(r.final_answer)}};
}

template <typename T>
std::string to_jsonl(std::span<const T> items) {
    std::string out;
    for (const T & item : items) {
        out += to_json(item).dump();
        out += '\n';
    }
    return out;
}

inline std::vector<PreferencePair> pairs_from_jsonl(const std::string & text) {
    std::vector<PreferencePair> pairs;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string::npos) {
            end = text.size();
        }
        const std::string line = text.substr(start, end - start);
        if (line.find_first_not_of(" \t\r") != std::string::npos) {
            try {
                pairs.push_back(pair_from_json(json::parse(line)));
            } catch (const json::exception & e) {
                throw SchemaError(std::string("invalid JSON line: ") + e.what());
            }
        }
        start = end + 1;
    }
    return pairs;
}

}  // namespace maskverify
