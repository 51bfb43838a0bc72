#pragma once

// Best-of-N test-time selection: decode N candidates, verify each, keep the
// top K by score with seeded uniform tie-breaking.

#include "maskverify/errors.hpp"
#include "maskverify/generator.hpp"
#include "maskverify/microworld.hpp"
#include "maskverify/parallel.hpp"
#include "maskverify/random.hpp"
#include "maskverify/verifier.hpp"

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

namespace maskverify {

inline constexpr int default_candidates = 20;
inline constexpr int default_top_k      = 4;

struct Candidate {
    TokenGrid grid;
    std::uint64_t seed = 0;

    bool operator==(const Candidate &) const = default;
};

struct CandidateSet {
    TaskSpec spec;
    std::vector<Candidate> candidates;
    std::vector<Verdict> verdicts;  // empty or one per candidate

    bool scored() const { return !candidates.empty() && verdicts.size() == candidates.size(); }

    std::vector<double> scores() const {
        std::vector<double> out;
        out.reserve(verdicts.size());
        for (const Verdict & v : verdicts) {
            out.push_back(v.score);
        }
        return out;
    }
};

inline std::uint64_t candidate_seed(std::uint64_t base_seed, std::size_t index) {
    return derive_seed(base_seed, Stream::candidate, index);
}

inline std::uint64_t verification_seed(std::uint64_t seed, std::size_t index) {
    return derive_seed(seed, Stream::verify, index);
}

template <TokenPredictor P>
CandidateSet generate_candidates(const P & predictor, const TaskSpec & spec, int n, int steps, double scale,
                                 std::uint64_t base_seed, unsigned jobs = 1, const DecodeOptions & opts = {}) {
    if (n < 1) {
        throw InvalidArgument("need at least one candidate");
    }
    CandidateSet set{spec, std::vector<Candidate>(static_cast<std::size_t>(n)), {}};
    parallel_for(set.candidates.size(), jobs, [&](std::size_t i) {
        const std::uint64_t seed = candidate_seed(base_seed, i);
        set.candidates[i]        = {decode_iterative(predictor, spec, steps, scale, seed, opts), seed};
    });
    return set;
}

inline CandidateSet score_candidates(CandidateSet set, Strategy strategy, const AnswererConfig & cfg,
                                     std::uint64_t seed, unsigned jobs = 1) {
    std::vector<Verdict> verdicts(set.candidates.size());
    parallel_for(verdicts.size(), jobs, [&](std::size_t i) {
        verdicts[i] = verify(strategy, set.candidates[i].grid, set.spec, cfg, verification_seed(seed, i));
    });
    set.verdicts = std::move(verdicts);
    return set;
}

struct Selection {
    std::vector<std::size_t> ranked;  // first min(K, N) indices, best first
    std::size_t k = 1;
    std::optional<Strategy> strategy;
    // Groups of candidate indices sharing a score (size >= 2), best first,
    // each in its drawn order.
    std::vector<std::vector<std::size_t>> tie_groups;
    std::vector<double> ranked_scores;
};

// Stable descending sort by score; equal scores are ordered by `tie_keys`
// (ascending), then by index.
inline Selection top_k(std::span<const double> scores, std::size_t k, std::span<const std::uint64_t> tie_keys) {
    if (scores.empty()) {
        throw MissingVerdicts("no scores to rank");
    }
    if (k < 1) {
        throw InvalidArgument("K must be at least 1");
    }
    if (tie_keys.size() != scores.size()) {
        throw LengthMismatch("one tie key per score is required");
    }
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) {
            return scores[a] > scores[b];
        }
        return tie_keys[a] < tie_keys[b];
    });

    Selection sel;
    sel.k = k;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) {
            ++j;
        }
        if (j - i > 1) {
            sel.tie_groups.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                                        order.begin() + static_cast<std::ptrdiff_t>(j));
        }
        i = j;
    }
    order.resize(std::min(k, order.size()));
    for (std::size_t idx : order) {
        sel.ranked_scores.push_back(scores[idx]);
    }
    sel.ranked = std::move(order);
    return sel;
}

inline std::vector<std::uint64_t> tie_keys(std::size_t n, std::uint64_t tie_seed) {
    std::vector<std::uint64_t> keys(n);
    for (std::size_t i = 0; i < n; ++i) {
        keys[i] = derive_seed(tie_seed, Stream::tie, i);
    }
    return keys;
}

inline Selection top_k(const CandidateSet & set, std::size_t k, std::uint64_t tie_seed) {
    if (!set.scored()) {
        throw MissingVerdicts("candidate set has not been scored");
    }
    const auto scores = set.scores();
    const auto keys   = tie_keys(scores.size(), tie_seed);
    Selection sel     = top_k(scores, k, keys);
    sel.strategy      = set.verdicts.front().strategy;
    return sel;
}

}  // namespace maskverify
