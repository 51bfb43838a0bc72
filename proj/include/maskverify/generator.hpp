#pragma once

// Masked-token image generation over the micro-world token grid: training
// example construction, the cosine masking schedule, classifier-free guidance,
// and the iterative parallel decoder. Token predictors plug in through the
// TokenPredictor concept; PlantedPredictor is the built-in toy predictor.

#include "maskverify/errors.hpp"
#include "maskverify/microworld.hpp"
#include "maskverify/random.hpp"

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

namespace maskverify {

// Inference defaults.
inline constexpr int default_steps       = 50;
inline constexpr double default_cfg_scale = 5.0;

// ---------------------------------------------------------------------------
// Masks and training examples

struct Mask {
    std::vector<std::uint8_t> bits;
    std::size_t count = 0;

    bool operator==(const Mask &) const = default;
};

inline Mask sample_mask(std::size_t n_tokens, double eta, std::uint64_t seed) {
    if (n_tokens < 1) {
        throw InvalidArgument("sample_mask needs at least one token");
    }
    if (!(eta >= 0.0 && eta <= 1.0)) {
        throw BadEta("masking ratio " + std::to_string(eta) + " outside [0,1]");
    }
    const auto count = static_cast<std::size_t>(std::llround(eta * static_cast<double>(n_tokens)));
    std::vector<std::size_t> order(n_tokens);
    for (std::size_t i = 0; i < n_tokens; ++i) {
        order[i] = i;
    }
    Rng rng(derive_seed(seed, Stream::mask));
    for (std::size_t i = 0; i < count; ++i) {
        std::swap(order[i], order[i + rng.below(n_tokens - i)]);
    }
    Mask mask{std::vector<std::uint8_t>(n_tokens, 0), count};
    for (std::size_t i = 0; i < count; ++i) {
        mask.bits[order[i]] = 1;
    }
    return mask;
}

// gamma(r) = cos(pi r / 2): fraction of tokens masked at schedule position r.
inline double cosine_gamma(double r) { return std::cos(std::numbers::pi * r / 2.0); }

struct TrainingExample {
    std::vector<Token> input;
    // Set only at masked positions.
    std::vector<std::optional<Token>> targets;
    Mask mask;
};

inline TrainingExample masked_training_example(const TokenGrid & grid, const Mask & mask) {
    validate(grid);
    if (!grid.complete()) {
        throw IncompleteGrid("training examples need a complete grid");
    }
    if (mask.bits.size() != grid.size()) {
        throw LengthMismatch("mask length does not match token count");
    }
    TrainingExample ex{grid.tokens, std::vector<std::optional<Token>>(grid.size()), mask};
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (mask.bits[i]) {
            ex.targets[i] = grid.tokens[i];
            ex.input[i]   = mask_token;
        }
    }
    return ex;
}

// Draws r ~ U(0,1), sets eta = gamma(r) and masks round(eta * N) positions.
inline TrainingExample masked_training_example(const TokenGrid & grid, std::uint64_t seed) {
    validate(grid);
    if (!grid.complete()) {
        throw IncompleteGrid("training examples need a complete grid");
    }
    Rng rng(derive_seed(seed, Stream::ratio));
    const double eta = std::clamp(cosine_gamma(rng.uniform()), 0.0, 1.0);
    return masked_training_example(grid, sample_mask(grid.size(), eta, seed));
}

// ---------------------------------------------------------------------------
// Schedule

// Number of positions still masked after step t of T: ceil(N cos(pi t / 2T)),
// forced to 0 at t = T.
inline std::size_t cosine_masked_count(std::size_t n, int t, int total_steps) {
    if (total_steps < 1) {
        throw BadStep("schedule needs T >= 1");
    }
    if (t < 0 || t > total_steps) {
        throw BadStep("step " + std::to_string(t) + " outside [0," + std::to_string(total_steps) + "]");
    }
    if (t == total_steps) {
        return 0;
    }
    if (t == 0) {
        return n;
    }
    // cos(pi t / 2T) is rational only at t/T = 2/3 (value 1/2); everywhere
    // else N cos(.) is irrational and long double resolves the ceiling.
    if (3 * t == 2 * total_steps) {
        return (n + 1) / 2;
    }
    const long double angle = std::numbers::pi_v<long double> * static_cast<long double>(t) /
                              (2.0L * static_cast<long double>(total_steps));
    return static_cast<std::size_t>(std::ceil(static_cast<long double>(n) * std::cos(angle)));
}

struct ScheduleState {
    int total_steps = 1;
    int step        = 0;
    std::size_t n   = 0;
    std::vector<std::size_t> masked_after;  // index t in [0, T]
};

inline ScheduleState make_schedule(std::size_t n, int total_steps) {
    ScheduleState s{total_steps, 0, n, {}};
    for (int t = 0; t <= total_steps; ++t) {
        s.masked_after.push_back(cosine_masked_count(n, t, total_steps));
    }
    return s;
}

// ---------------------------------------------------------------------------
// Classifier-free guidance

inline std::vector<double> cfg_combine(std::span<const double> cond, std::span<const double> uncond, double scale) {
    if (cond.size() != uncond.size()) {
        throw LengthMismatch("conditional and unconditional logits differ in length (" + std::to_string(cond.size()) +
                             " vs " + std::to_string(uncond.size()) + ")");
    }
    std::vector<double> out(cond.size());
    for (std::size_t i = 0; i < cond.size(); ++i) {
        out[i] = uncond[i] + scale * (cond[i] - uncond[i]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Predictors

// Logits for every currently masked position of a partial grid, in ascending
// position order. Each vector spans the predictable vocabulary (no MASK).
struct PredictorOutput {
    std::vector<std::size_t> positions;
    std::vector<std::vector<double>> cond;
    std::vector<std::vector<double>> uncond;
};

// A predictor opens a per-decode session for (spec, seed); the session
// answers logit queries on partial grids.
template <typename P>
concept TokenPredictor = requires(const P & p, const TaskSpec & spec, std::uint64_t seed, const TokenGrid & grid) {
    { p.grid_size() } -> std::convertible_to<GridSize>;
    { p.begin(spec, seed) };
    { p.begin(spec, seed).predict(grid) } -> std::same_as<PredictorOutput>;
};

enum class PlantedSeedPolicy : std::uint8_t {
    per_decode,  // layout and corruption both follow the decode seed
    fixed,       // layout from fixed_seed, corruption from the decode seed
};

struct PlantedPredictorConfig {
    double epsilon     = 0.3;
    double temperature = 0.25;
    // Unconditional logit of background, in units of 1/temperature.
    double background_prior = 0.5;
    PlantedSeedPolicy seed_policy = PlantedSeedPolicy::per_decode;
    std::uint64_t fixed_seed      = 0;

    void validate() const {
        if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
            throw InvalidArgument("epsilon must lie in [0,1]");
        }
        if (!(temperature > 0.0) || !std::isfinite(temperature)) {
            throw InvalidArgument("temperature must be positive and finite");
        }
        if (!std::isfinite(background_prior)) {
            throw InvalidArgument("background prior must be finite");
        }
    }
};

enum class Corruption : std::uint8_t { none, dropped, recolored, displaced };

struct PlantedScene {
    Scene clean;                          // satisfies the spec
    Scene scene;                          // after corruption
    std::vector<Corruption> corruptions;  // one per object of `clean`

    bool uncorrupted() const {
        return std::all_of(corruptions.begin(), corruptions.end(), [](Corruption c) { return c == Corruption::none; });
    }
};

// Samples a spec-satisfying scene, then independently corrupts each object
// with probability epsilon (dropped, recolored or displaced, equally likely).
inline PlantedScene planted_scene(const TaskSpec & spec, const PlantedPredictorConfig & cfg, std::uint64_t seed,
                                  GridSize size = {}) {
    cfg.validate();
    const std::uint64_t layout_seed =
        cfg.seed_policy == PlantedSeedPolicy::fixed ? derive_seed(cfg.fixed_seed, Stream::planted)
                                                    : derive_seed(seed, Stream::planted);
    PlantedScene out;
    out.clean = sample_scene(spec, layout_seed, size);
    Rng rng(derive_seed(seed, Stream::corrupt));

    const auto & objs = out.clean.objects;
    out.corruptions.assign(objs.size(), Corruption::none);
    for (auto & c : out.corruptions) {
        if (rng.bernoulli(cfg.epsilon)) {
            c = static_cast<Corruption>(1 + rng.below(3));
        }
    }

    std::vector<ObjectSpec> kept;
    std::vector<std::size_t> displaced;
    for (std::size_t i = 0; i < objs.size(); ++i) {
        ObjectSpec o = objs[i];
        switch (out.corruptions[i]) {
            case Corruption::dropped: continue;
            case Corruption::recolored: {
                auto shift = 1 + rng.below(3);
                o.color    = static_cast<Color>((static_cast<std::size_t>(o.color) + shift) % 4);
                break;
            }
            case Corruption::displaced: displaced.push_back(kept.size()); break;
            case Corruption::none: break;
        }
        kept.push_back(o);
    }
    for (std::size_t k : displaced) {
        std::vector<bool> used(static_cast<std::size_t>(size.cells()), false);
        for (const ObjectSpec & o : kept) {
            used[static_cast<std::size_t>(o.row * size.width + o.col)] = true;
        }
        std::vector<int> free_cells;
        for (int cell = 0; cell < size.cells(); ++cell) {
            if (!used[static_cast<std::size_t>(cell)]) {
                free_cells.push_back(cell);
            }
        }
        if (!free_cells.empty()) {
            const int cell = free_cells[rng.below(free_cells.size())];
            kept[k].col    = cell % size.width;
            kept[k].row    = cell / size.width;
        }
    }
    out.scene = Scene{size.width, size.height, std::move(kept)}.canonical();
    return out;
}

namespace detail {

inline PredictorOutput planted_logits(const TokenGrid & planted, const TokenGrid & partial,
                                      const PlantedPredictorConfig & cfg) {
    if (partial.width != planted.width || partial.height != planted.height ||
        partial.tokens.size() != planted.tokens.size()) {
        throw LengthMismatch("partial grid does not match the predictor's grid size");
    }
    const double inv_t = 1.0 / cfg.temperature;
    PredictorOutput out;
    for (std::size_t i = 0; i < partial.tokens.size(); ++i) {
        if (partial.tokens[i] != mask_token) {
            continue;
        }
        std::vector<double> cond(predict_vocab_size, 0.0);
        std::vector<double> uncond(predict_vocab_size, 0.0);
        cond[planted.tokens[i]]   = inv_t;
        uncond[background_token] = cfg.background_prior * inv_t;
        out.positions.push_back(i);
        out.cond.push_back(std::move(cond));
        out.uncond.push_back(std::move(uncond));
    }
    return out;
}

}  // namespace detail

// Toy stand-in for a trained token head. The conditional branch is peaked at
// the planted scene's tokens; the unconditional branch is a spec-independent
// background prior.
class PlantedPredictor {
  public:
    class Session {
      public:
        Session(PlantedScene planted, const PlantedPredictorConfig & cfg)
            : planted_(std::move(planted)), grid_(scene_to_grid(planted_.scene)), cfg_(cfg) {}

        PredictorOutput predict(const TokenGrid & partial) const { return detail::planted_logits(grid_, partial, cfg_); }

        const PlantedScene & planted() const { return planted_; }
        const TokenGrid & planted_grid() const { return grid_; }

      private:
        PlantedScene planted_;
        TokenGrid grid_;
        PlantedPredictorConfig cfg_;
    };

    explicit PlantedPredictor(PlantedPredictorConfig cfg = {}, GridSize size = {}) : cfg_(cfg), size_(size) {
        cfg_.validate();
    }

    GridSize grid_size() const { return size_; }
    const PlantedPredictorConfig & config() const { return cfg_; }

    Session begin(const TaskSpec & spec, std::uint64_t seed) const {
        return Session(planted_scene(spec, cfg_, seed, size_), cfg_);
    }

  private:
    PlantedPredictorConfig cfg_;
    GridSize size_;
};

// Single-query form of the planted predictor.
inline PredictorOutput planted_predictor(const TaskSpec & spec, const TokenGrid & partial,
                                         const PlantedPredictorConfig & cfg, std::uint64_t seed) {
    return PlantedPredictor(cfg, partial.dims()).begin(spec, seed).predict(partial);
}

// ---------------------------------------------------------------------------
// Iterative decoding

struct DecodeOptions {
    // Scale of the Gumbel noise added to confidences; annealed linearly to
    // zero at the final step.
    double choice_temperature = 4.5;
};

struct DecodeResult {
    TokenGrid grid;
    // Step (1-based) at which each position was committed.
    std::vector<int> commit_step;
    std::vector<std::size_t> masked_after;  // observed masked count after each step, index 0 = start
};

namespace detail {

inline void check_predictor_output(const PredictorOutput & out, const TokenGrid & grid) {
    std::size_t j = 0;
    for (std::size_t i = 0; i < grid.tokens.size(); ++i) {
        if (grid.tokens[i] != mask_token) {
            continue;
        }
        if (j >= out.positions.size() || out.positions[j] != i) {
            throw InvalidArgument("predictor must return logits for exactly the masked positions, in order");
        }
        ++j;
    }
    if (j != out.positions.size() || out.cond.size() != j || out.uncond.size() != j) {
        throw InvalidArgument("predictor output size does not match the masked positions");
    }
    for (std::size_t k = 0; k < j; ++k) {
        if (out.cond[k].size() != predict_vocab_size || out.uncond[k].size() != predict_vocab_size) {
            throw LengthMismatch("predictor logits must span the predictable vocabulary");
        }
        for (std::size_t v = 0; v < predict_vocab_size; ++v) {
            if (!std::isfinite(out.cond[k][v]) || !std::isfinite(out.uncond[k][v])) {
                throw NonFinite("predictor returned a non-finite logit");
            }
        }
    }
}

}  // namespace detail

// Iterative parallel decoding: start fully masked; at step t query the
// predictor on every masked position, guide, sample a token and a confidence
// per position, and commit the most confident predictions until exactly
// cosine_masked_count(N, t, T) positions remain masked. Ties in confidence go
// to the lower position index.
template <TokenPredictor P>
DecodeResult decode_iterative_traced(const P & predictor, const TaskSpec & spec, int total_steps, double scale,
                                     std::uint64_t seed, const DecodeOptions & opts = {}) {
    if (total_steps < 1) {
        throw BadStep("decoding needs T >= 1");
    }
    const GridSize size = predictor.grid_size();
    DecodeResult res{TokenGrid::filled(size, mask_token), std::vector<int>(static_cast<std::size_t>(size.cells()), 0),
                     {}};
    const std::size_t n = res.grid.size();
    res.masked_after.push_back(n);
    auto session = predictor.begin(spec, seed);

    struct Candidate {
        std::size_t position;
        Token token;
        double confidence;
    };

    for (int step = 1; step <= total_steps; ++step) {
        const PredictorOutput out = session.predict(res.grid);
        detail::check_predictor_output(out, res.grid);

        const double noise = opts.choice_temperature * (1.0 - static_cast<double>(step) / total_steps);
        std::vector<Candidate> cands;
        cands.reserve(out.positions.size());
        for (std::size_t k = 0; k < out.positions.size(); ++k) {
            const std::size_t pos       = out.positions[k];
            const std::vector<double> l = cfg_combine(out.cond[k], out.uncond[k], scale);
            const double top            = *std::max_element(l.begin(), l.end());
            std::vector<double> weights(l.size());
            double z = 0.0;
            for (std::size_t v = 0; v < l.size(); ++v) {
                weights[v] = std::exp(l[v] - top);
                z += weights[v];
            }
            Rng token_rng(derive_seed(seed, Stream::token, step, pos));
            const std::size_t tok = token_rng.categorical(weights);
            double confidence     = (l[tok] - top) - std::log(z);
            if (noise > 0.0) {
                Rng gumbel_rng(derive_seed(seed, Stream::gumbel, step, pos));
                confidence += noise * gumbel_rng.gumbel();
            }
            cands.push_back({pos, static_cast<Token>(tok), confidence});
        }

        const std::size_t keep   = cosine_masked_count(n, step, total_steps);
        const std::size_t commit = cands.size() > keep ? cands.size() - keep : 0;
        std::stable_sort(cands.begin(), cands.end(),
                         [](const Candidate & a, const Candidate & b) { return a.confidence > b.confidence; });
        for (std::size_t c = 0; c < commit; ++c) {
            res.grid.tokens[cands[c].position]      = cands[c].token;
            res.commit_step[cands[c].position] = step;
        }
        res.masked_after.push_back(res.grid.masked_count());
    }
    return res;
}

template <TokenPredictor P>
TokenGrid decode_iterative(const P & predictor, const TaskSpec & spec, int total_steps = default_steps,
                           double scale = default_cfg_scale, std::uint64_t seed = 0, const DecodeOptions & opts = {}) {
    return decode_iterative_traced(predictor, spec, total_steps, scale, seed, opts).grid;
}

}  // namespace maskverify
