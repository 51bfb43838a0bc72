#pragma once

// Verification strategies over decoded grids: outcome (one holistic yes/no),
// rule-based (mean over atomic questions) and chain-of-thought (the same
// atomic questions answered inside a transcript, scored by the fraction of
// yes answers).

#include "maskverify/errors.hpp"
#include "maskverify/microworld.hpp"
#include "maskverify/random.hpp"
#include "maskverify/transcript.hpp"

#include <optional>
#include <string>
#include <vector>

namespace maskverify {

enum class Strategy : std::uint8_t { outcome, rule, cot };

inline constexpr std::array<Strategy, 3> all_strategies{Strategy::outcome, Strategy::rule, Strategy::cot};

inline constexpr std::string_view to_string(Strategy s) {
    switch (s) {
        case Strategy::outcome: return "outcome";
        case Strategy::rule: return "rule";
        case Strategy::cot: return "cot";
    }
    return "";
}

inline std::optional<Strategy> strategy_from_string(std::string_view t) { return enum_from_string(t, all_strategies); }

// ---------------------------------------------------------------------------
// Atomic questions

enum class CheckKind : std::uint8_t { presence, count, color, relation };

// Structured predicate behind one yes/no question. For presence/count/color
// only `shape`, `color` and `count` are used; relations also use the object
// fields.
struct AtomicCheck {
    CheckKind kind{};
    Shape shape{};
    Color color{};
    int count    = 1;  // entity multiplicity; selects singular/plural phrasing
    Relation relation{};
    Shape object_shape{};
    Color object_color{};
    int object_count = 1;

    bool operator==(const AtomicCheck &) const = default;
};

namespace detail {

inline std::string noun(Shape s, int count) {
    return std::string(count == 1 ? to_string(s) : plural(s));
}

}  // namespace detail

inline std::string question_text(const AtomicCheck & c) {
    const bool many = c.count > 1;
    switch (c.kind) {
        case CheckKind::presence:
            return many ? "Are there " + detail::noun(c.shape, 2) + "?" : "Is there a " + detail::noun(c.shape, 1) + "?";
        case CheckKind::count:
            return "Are there " + std::string(number_word(c.count)) + " " + detail::noun(c.shape, c.count) + "?";
        case CheckKind::color:
            return std::string(many ? "Are the " : "Is the ") + detail::noun(c.shape, c.count) + " " +
                   std::string(to_string(c.color)) + "?";
        case CheckKind::relation:
            return std::string(many ? "Are the " : "Is the ") + std::string(to_string(c.color)) + " " +
                   detail::noun(c.shape, c.count) + " " + std::string(phrase(c.relation)) + " the " +
                   std::string(to_string(c.object_color)) + " " + detail::noun(c.object_shape, c.object_count) + "?";
    }
    return {};
}

// Exact truth value of a check on a scene.
//   presence: some object has the shape
//   count:    exactly `count` objects have the shape
//   color:    singular - some object of the shape has the color;
//             plural   - the shape is present and all its objects have the color
//   relation: every subject/object instance pair stands in the relation
inline bool evaluate(const AtomicCheck & c, const Scene & scene) {
    switch (c.kind) {
        case CheckKind::presence: return count_shape(scene, c.shape) >= 1;
        case CheckKind::count: return count_shape(scene, c.shape) == c.count;
        case CheckKind::color:
            if (c.count == 1) {
                return count_object(scene, c.shape, c.color) >= 1;
            } else {
                const int n = count_shape(scene, c.shape);
                return n >= 1 && count_object(scene, c.shape, c.color) == n;
            }
        case CheckKind::relation:
            return group_relation(scene, c.shape, c.color, c.relation, c.object_shape, c.object_color);
    }
    return false;
}

struct AtomicQuestion {
    std::string text;
    AtomicCheck check;

    bool operator==(const AtomicQuestion &) const = default;
};

inline AtomicQuestion make_question(const AtomicCheck & c) { return {question_text(c), c}; }

// Fixed-rule decomposition: for each required object, presence, then count
// (only when more than one is required), then color; then one question per
// relation.
inline std::vector<AtomicQuestion> decompose(const TaskSpec & spec) {
    std::vector<AtomicQuestion> qs;
    for (const Requirement & r : spec.objects) {
        qs.push_back(make_question({CheckKind::presence, r.shape, r.color, r.count}));
        if (r.count > 1) {
            qs.push_back(make_question({CheckKind::count, r.shape, r.color, r.count}));
        }
        qs.push_back(make_question({CheckKind::color, r.shape, r.color, r.count}));
    }
    for (const RelationSpec & rel : spec.relations) {
        const Requirement & a = spec.objects.at(static_cast<std::size_t>(rel.subject));
        const Requirement & b = spec.objects.at(static_cast<std::size_t>(rel.object));
        qs.push_back(
            make_question({CheckKind::relation, a.shape, a.color, a.count, rel.relation, b.shape, b.color, b.count}));
    }
    return qs;
}

// ---------------------------------------------------------------------------
// Answerer

struct AnswererConfig {
    // Probability of inverting the exact answer.
    double flip_rate = 0.0;

    void validate() const {
        if (!(flip_rate >= 0.0 && flip_rate <= 1.0)) {
            throw InvalidArgument("flip rate must lie in [0,1]");
        }
    }
};

namespace detail {

inline bool maybe_flip(bool exact, double flip_rate, std::uint64_t seed) {
    Rng rng(seed);
    return rng.bernoulli(flip_rate) ? !exact : exact;
}

inline Scene complete_scene(const TokenGrid & grid) {
    if (!grid.complete()) {
        throw IncompleteGrid("verification needs a complete grid");
    }
    return grid_to_scene(grid);
}

}  // namespace detail

inline Answer answer(const Scene & scene, const AtomicQuestion & q, const AnswererConfig & cfg, std::uint64_t seed) {
    cfg.validate();
    return to_answer(detail::maybe_flip(evaluate(q.check, scene), cfg.flip_rate, seed));
}

inline Answer answer(const TokenGrid & grid, const AtomicQuestion & q, const AnswererConfig & cfg, std::uint64_t seed) {
    return answer(detail::complete_scene(grid), q, cfg, seed);
}

// ---------------------------------------------------------------------------
// Strategies

struct Verdict {
    Strategy strategy{};
    double score = 0.0;
    std::optional<Transcript> transcript;
    // Per-question answers for rule and cot; the single answer for outcome.
    std::vector<Answer> answers;

    bool operator==(const Verdict & o) const {
        return strategy == o.strategy && score == o.score && answers == o.answers &&
               transcript.has_value() == o.transcript.has_value() &&
               (!transcript || (*transcript == *o.transcript && transcript->raw == o.transcript->raw));
    }
};

inline Verdict run_outcome(const TokenGrid & grid, const TaskSpec & spec, const AnswererConfig & cfg,
                           std::uint64_t seed) {
    cfg.validate();
    const Scene scene = detail::complete_scene(grid);
    const bool exact  = oracle_check(scene, spec).pass;
    const Answer a    = to_answer(detail::maybe_flip(exact, cfg.flip_rate, derive_seed(seed, Stream::outcome)));
    return {Strategy::outcome, a == Answer::yes ? 1.0 : 0.0, std::nullopt, {a}};
}

namespace detail {

// Question j is answered with seed derive(seed, question, j) under both the
// rule and cot strategies, so they see identical answers.
inline std::vector<Answer> answer_all(const Scene & scene, const std::vector<AtomicQuestion> & qs,
                                      const AnswererConfig & cfg, std::uint64_t seed) {
    std::vector<Answer> answers;
    answers.reserve(qs.size());
    for (std::size_t j = 0; j < qs.size(); ++j) {
        answers.push_back(answer(scene, qs[j], cfg, derive_seed(seed, Stream::question, j)));
    }
    return answers;
}

inline std::string strip_question_mark(const std::string & text) {
    return !text.empty() && text.back() == '?' ? text.substr(0, text.size() - 1) : text;
}

}  // namespace detail

inline Verdict run_rule(const TokenGrid & grid, const TaskSpec & spec, const AnswererConfig & cfg, std::uint64_t seed) {
    cfg.validate();
    const Scene scene = detail::complete_scene(grid);
    const auto qs     = decompose(spec);
    if (qs.empty()) {
        throw EmptyDecomposition("spec decomposes into zero questions");
    }
    auto answers = detail::answer_all(scene, qs, cfg, seed);
    double sum   = 0.0;
    for (Answer a : answers) {
        sum += a == Answer::yes ? 1.0 : 0.0;
    }
    return {Strategy::rule, sum / static_cast<double>(answers.size()), std::nullopt, std::move(answers)};
}

inline Verdict run_cot(const TokenGrid & grid, const TaskSpec & spec, const AnswererConfig & cfg, std::uint64_t seed) {
    cfg.validate();
    const Scene scene = detail::complete_scene(grid);
    const auto qs     = decompose(spec);
    if (qs.empty()) {
        throw EmptyDecomposition("spec decomposes into zero questions");
    }
    auto answers = detail::answer_all(scene, qs, cfg, seed);
    std::vector<std::string> texts;
    texts.reserve(qs.size());
    for (const AtomicQuestion & q : qs) {
        texts.push_back(detail::strip_question_mark(q.text));
    }
    Transcript t       = make_transcript(std::move(texts), answers);
    const double score = transcript_score(t);
    return {Strategy::cot, score, std::move(t), std::move(answers)};
}

inline Verdict verify(Strategy strategy, const TokenGrid & grid, const TaskSpec & spec, const AnswererConfig & cfg,
                      std::uint64_t seed) {
    switch (strategy) {
        case Strategy::outcome: return run_outcome(grid, spec, cfg, seed);
        case Strategy::rule: return run_rule(grid, spec, cfg, seed);
        case Strategy::cot: return run_cot(grid, spec, cfg, seed);
    }
    throw InvalidArgument("unknown strategy");
}

}  // namespace maskverify
