#include "maskverify/selector.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace maskverify;

namespace {

Selection rank(std::vector<double> scores, std::size_t k, std::uint64_t tie_seed = 0) {
    const auto keys = tie_keys(scores.size(), tie_seed);
    return top_k(scores, k, keys);
}

}  // namespace

TEST(Generate, SingletonMatchesDirectDecode) {
    const PlantedPredictor pred;
    const TaskSpec spec = random_task_spec(Category::two_objects, 3);
    const CandidateSet set = generate_candidates(pred, spec, 1, 50, 5.0, 99);
    ASSERT_EQ(set.candidates.size(), 1u);
    EXPECT_EQ(set.candidates[0].seed, derive_seed(99, Stream::candidate, 0));
    EXPECT_EQ(set.candidates[0].grid, decode_iterative(pred, spec, 50, 5.0, candidate_seed(99, 0)));
}

TEST(Generate, DefaultsAndDeterminism) {
    EXPECT_EQ(default_candidates, 20);
    EXPECT_EQ(default_top_k, 4);
    const PlantedPredictor pred;
    const TaskSpec spec = random_task_spec(Category::counting, 5);
    const auto a        = generate_candidates(pred, spec, default_candidates, 20, 5.0, 7);
    const auto b        = generate_candidates(pred, spec, default_candidates, 20, 5.0, 7, 4);
    EXPECT_EQ(a.candidates, b.candidates);  // independent of the job count
    EXPECT_THROW(generate_candidates(pred, spec, 0, 20, 5.0, 7), InvalidArgument);
}

TEST(Score, CotOnCorrectCandidateIsOne) {
    PlantedPredictorConfig cfg;
    cfg.epsilon = 0.0;
    const TaskSpec spec = random_task_spec(Category::position, 2);
    auto set = score_candidates(generate_candidates(PlantedPredictor(cfg), spec, 3, 20, 5.0, 1), Strategy::cot, {}, 1);
    for (const Verdict & v : set.verdicts) {
        EXPECT_EQ(v.score, 1.0);
    }
}

TEST(Score, OutcomeIsBinaryAndScoringIsRepeatable) {
    const TaskSpec spec = random_task_spec(Category::long_compositional, 2);
    const auto set      = generate_candidates(PlantedPredictor{}, spec, 10, 20, 5.0, 4);
    const auto a        = score_candidates(set, Strategy::outcome, {0.2}, 5);
    const auto b        = score_candidates(set, Strategy::outcome, {0.2}, 5, 3);
    for (double s : a.scores()) {
        EXPECT_TRUE(s == 0.0 || s == 1.0);
    }
    EXPECT_EQ(a.verdicts, b.verdicts);
    const auto c = score_candidates(set, Strategy::cot, {0.2}, 5);
    EXPECT_EQ(c.verdicts, score_candidates(set, Strategy::cot, {0.2}, 5).verdicts);
}

TEST(TopK, Example) {
    const Selection sel = rank({0.5, 1.0, 0.75}, 2);
    EXPECT_EQ(sel.ranked, (std::vector<std::size_t>{1, 2}));
    EXPECT_EQ(sel.ranked_scores, (std::vector<double>{1.0, 0.75}));
    EXPECT_TRUE(sel.tie_groups.empty());
}

TEST(TopK, KLargerThanNReturnsAll) {
    const Selection sel = rank({0.1, 0.9}, 10);
    EXPECT_EQ(sel.ranked, (std::vector<std::size_t>{1, 0}));
}

TEST(TopK, Errors) {
    EXPECT_THROW(rank({}, 1), MissingVerdicts);
    EXPECT_THROW(rank({1.0}, 0), InvalidArgument);
    const std::vector<double> s{1.0, 2.0};
    const std::vector<std::uint64_t> k{1};
    EXPECT_THROW(top_k(s, 1, k), LengthMismatch);
    CandidateSet unscored = generate_candidates(PlantedPredictor{}, random_task_spec(Category::colors, 1), 2, 4, 5.0, 1);
    EXPECT_THROW(top_k(unscored, 1, 0), MissingVerdicts);
}

TEST(TopK, TieGroupsReported) {
    const Selection sel = rank({0.5, 1.0, 0.5, 1.0, 0.0}, 5, 3);
    ASSERT_EQ(sel.tie_groups.size(), 2u);
    EXPECT_EQ(std::set<std::size_t>(sel.tie_groups[0].begin(), sel.tie_groups[0].end()), (std::set<std::size_t>{1, 3}));
    EXPECT_EQ(std::set<std::size_t>(sel.tie_groups[1].begin(), sel.tie_groups[1].end()), (std::set<std::size_t>{0, 2}));
    EXPECT_EQ(sel.ranked.back(), 4u);
}

TEST(TopK, UniformTieBreaking) {
    for (std::size_t n : {2u, 5u, 20u}) {
        std::vector<int> hits(n, 0);
        for (int seed = 0; seed < 10000; ++seed) {
            ++hits[rank(std::vector<double>(n, 0.5), 1, static_cast<std::uint64_t>(seed)).ranked[0]];
        }
        for (int h : hits) {
            EXPECT_NEAR(h / 10000.0, 1.0 / static_cast<double>(n), 0.02) << "n=" << n;
        }
    }
}

TEST(TopK, SelectionIsOptimal) {
    Rng rng(1);
    for (int trial = 0; trial < 2000; ++trial) {
        const std::size_t n = 1 + rng.below(20);
        std::vector<double> scores(n);
        for (double & s : scores) {
            s = static_cast<double>(rng.below(5)) / 4.0;
        }
        const std::size_t k = 1 + rng.below(n + 2);
        const Selection sel = rank(scores, k, static_cast<std::uint64_t>(trial));
        ASSERT_EQ(sel.ranked.size(), std::min(k, n));
        std::set<std::size_t> chosen(sel.ranked.begin(), sel.ranked.end());
        ASSERT_EQ(chosen.size(), sel.ranked.size());
        for (std::size_t i = 1; i < sel.ranked.size(); ++i) {
            ASSERT_GE(scores[sel.ranked[i - 1]], scores[sel.ranked[i]]);
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (!chosen.contains(i)) {
                for (std::size_t c : chosen) {
                    ASSERT_GE(scores[c], scores[i]);
                }
            }
        }
    }
}

TEST(TopK, PermutationInvariance) {
    Rng rng(2);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 2 + rng.below(15);
        std::vector<double> scores(n);
        for (double & s : scores) {
            s = static_cast<double>(rng.below(3)) / 2.0;
        }
        const auto keys = tie_keys(n, static_cast<std::uint64_t>(trial));
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        rng.shuffle(perm);
        // permuted[i] = original[perm[i]], with tie keys carried along
        std::vector<double> pscores(n);
        std::vector<std::uint64_t> pkeys(n);
        for (std::size_t i = 0; i < n; ++i) {
            pscores[i] = scores[perm[i]];
            pkeys[i]   = keys[perm[i]];
        }
        const std::size_t k = 1 + rng.below(n);
        const Selection a   = top_k(scores, k, keys);
        const Selection b   = top_k(pscores, k, pkeys);
        std::vector<std::size_t> mapped;
        for (std::size_t i : b.ranked) {
            mapped.push_back(perm[i]);
        }
        ASSERT_EQ(mapped, a.ranked);
    }
}

TEST(Selection, PerfectVerifierBeatsSingleSample) {
    // Top-1 under an exact verifier is never worse than candidate 0.
    const PlantedPredictor pred;
    int base = 0, best = 0;
    for (int p = 0; p < 150; ++p) {
        const TaskSpec spec = random_task_spec(geneval_categories[static_cast<std::size_t>(p) % 6], derive_seed(3, p));
        auto set            = generate_candidates(pred, spec, 8, 20, 5.0, derive_seed(4, p));
        set                 = score_candidates(std::move(set), Strategy::cot, {}, derive_seed(5, p));
        const Selection sel = top_k(set, 1, derive_seed(6, p));
        const bool b0 = oracle_check(grid_to_scene(set.candidates[0].grid), spec).pass;
        const bool b1 = oracle_check(grid_to_scene(set.candidates[sel.ranked[0]].grid), spec).pass;
        ASSERT_GE(b1, b0);
        base += b0;
        best += b1;
    }
    EXPECT_GT(best, base);
}
