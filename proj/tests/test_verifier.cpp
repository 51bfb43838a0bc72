#include "maskverify/generator.hpp"
#include "maskverify/json_io.hpp"
#include "maskverify/templates.hpp"
#include "maskverify/verifier.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

using namespace maskverify;

namespace {

std::vector<std::string> texts(const std::vector<AtomicQuestion> & qs) {
    std::vector<std::string> out;
    for (const auto & q : qs) {
        out.push_back(q.text);
    }
    return out;
}

TokenGrid grid_of(std::vector<ObjectSpec> objects) { return scene_to_grid(Scene{8, 8, std::move(objects)}); }

const TaskSpec position_spec{Category::position,
                             {{Shape::circle, Color::red, 1}, {Shape::square, Color::blue, 1}},
                             {{0, Relation::left_of, 1}}};

}  // namespace

// --- decomposition ---------------------------------------------------------

TEST(Decompose, CountingPattern) {
    const TaskSpec spec{Category::counting, {{Shape::circle, Color::red, 3}}, {}};
    EXPECT_EQ(texts(decompose(spec)),
              (std::vector<std::string>{"Are there circles?", "Are there three circles?", "Are the circles red?"}));
}

TEST(Decompose, SingleObject) {
    const TaskSpec spec{Category::single_object, {{Shape::square, Color::blue, 1}}, {}};
    EXPECT_EQ(texts(decompose(spec)), (std::vector<std::string>{"Is there a square?", "Is the square blue?"}));
}

TEST(Decompose, PositionHasFiveFacts) {
    const auto qs = decompose(position_spec);
    ASSERT_EQ(qs.size(), 5u);
    EXPECT_EQ(qs[0].check.kind, CheckKind::presence);
    EXPECT_EQ(qs[1].check.kind, CheckKind::color);
    EXPECT_EQ(qs[2].check.kind, CheckKind::presence);
    EXPECT_EQ(qs[3].check.kind, CheckKind::color);
    EXPECT_EQ(qs[4].check.kind, CheckKind::relation);
    EXPECT_EQ(qs[4].text, "Is the red circle left of the blue square?");
}

TEST(Decompose, TextRegeneratesFromCheck) {
    for (Category c : all_categories) {
        for (int i = 0; i < 50; ++i) {
            for (const AtomicQuestion & q : decompose(random_task_spec(c, derive_seed(4, i)))) {
                EXPECT_EQ(question_text(q.check), q.text);
                EXPECT_EQ(q.text.back(), '?');
            }
        }
    }
}

TEST(Decompose, QuestionCountPerSpec) {
    for (int i = 0; i < 300; ++i) {
        const TaskSpec spec = random_task_spec(all_categories[static_cast<std::size_t>(i) % 7], derive_seed(6, i));
        std::size_t expected = spec.relations.size();
        for (const Requirement & r : spec.objects) {
            expected += r.count > 1 ? 3 : 2;
        }
        EXPECT_EQ(decompose(spec).size(), expected);
    }
}

// The conjunction of the atomic facts is exactly the holistic oracle.
TEST(Decompose, ConjunctionEqualsOracle) {
    int fails = 0;
    for (int i = 0; i < 3000; ++i) {
        const TaskSpec spec = random_task_spec(all_categories[static_cast<std::size_t>(i) % 7], derive_seed(7, i));
        PlantedPredictorConfig cfg;
        cfg.epsilon  = 0.5;
        const Scene s = planted_scene(spec, cfg, derive_seed(8, i)).scene;
        bool all      = true;
        for (const AtomicQuestion & q : decompose(spec)) {
            all = all && evaluate(q.check, s);
        }
        ASSERT_EQ(all, oracle_check(s, spec).pass) << i;
        fails += all ? 0 : 1;
    }
    EXPECT_GT(fails, 300);
}

// --- answerer --------------------------------------------------------------

TEST(Answer, ExactAtZeroFlip) {
    const TokenGrid g      = grid_of({{Shape::circle, Color::red, 2, 2}});
    const AtomicQuestion q = make_question({CheckKind::presence, Shape::circle, Color::red, 1});
    EXPECT_EQ(q.text, "Is there a circle?");
    EXPECT_EQ(answer(g, q, {0.0}, 1), Answer::yes);
}

TEST(Answer, FullFlipInverts) {
    const TokenGrid g = grid_of({{Shape::circle, Color::red, 2, 2}});
    for (int s = 0; s < 100; ++s) {
        for (const AtomicQuestion & q : decompose(position_spec)) {
            const Answer exact = answer(g, q, {0.0}, s);
            EXPECT_NE(answer(g, q, {1.0}, s), exact);
        }
    }
}

TEST(Answer, FlipFraction) {
    const TokenGrid g      = grid_of({{Shape::circle, Color::red, 2, 2}});
    const AtomicQuestion q = make_question({CheckKind::presence, Shape::circle, Color::red, 1});
    int flipped            = 0;
    for (int s = 0; s < 10000; ++s) {
        flipped += answer(g, q, {0.2}, static_cast<std::uint64_t>(s)) == Answer::no ? 1 : 0;
    }
    EXPECT_NEAR(flipped / 10000.0, 0.2, 0.01);
}

TEST(Answer, Errors) {
    TokenGrid g  = grid_of({});
    const auto q = make_question({CheckKind::presence, Shape::circle, Color::red, 1});
    EXPECT_THROW(answer(g, q, {1.5}, 0), InvalidArgument);
    g.tokens[0] = mask_token;
    EXPECT_THROW(answer(g, q, {0.0}, 0), IncompleteGrid);
    EXPECT_THROW(run_outcome(g, position_spec, {}, 0), IncompleteGrid);
    EXPECT_THROW(run_rule(g, position_spec, {}, 0), IncompleteGrid);
    EXPECT_THROW(run_cot(g, position_spec, {}, 0), IncompleteGrid);
}

// --- strategies ------------------------------------------------------------

TEST(Outcome, BinaryScores) {
    const TokenGrid good = grid_of({{Shape::circle, Color::red, 1, 2}, {Shape::square, Color::blue, 5, 2}});
    const TokenGrid bad  = grid_of({{Shape::circle, Color::red, 6, 2}, {Shape::square, Color::blue, 5, 2}});
    EXPECT_EQ(run_outcome(good, position_spec, {}, 0).score, 1.0);
    EXPECT_EQ(run_outcome(bad, position_spec, {}, 0).score, 0.0);
    for (int s = 0; s < 200; ++s) {
        const double v = run_outcome(bad, position_spec, {0.5}, s).score;
        EXPECT_TRUE(v == 0.0 || v == 1.0);
    }
}

TEST(Rule, FullAndPartial) {
    const TaskSpec counting{Category::counting, {{Shape::circle, Color::red, 3}}, {}};
    const TokenGrid three = grid_of({{Shape::circle, Color::red, 0, 0}, {Shape::circle, Color::red, 1, 0}, {Shape::circle, Color::red, 2, 0}});
    EXPECT_EQ(run_rule(three, counting, {}, 0).score, 1.0);
    // one fact fails: the count
    const TokenGrid two = grid_of({{Shape::circle, Color::red, 0, 0}, {Shape::circle, Color::red, 1, 0}});
    EXPECT_DOUBLE_EQ(run_rule(two, counting, {}, 0).score, 2.0 / 3.0);
}

TEST(Cot, ScoreAndTranscript) {
    const TokenGrid g = grid_of({{Shape::circle, Color::red, 1, 2}, {Shape::square, Color::green, 5, 2}});
    const Verdict v   = run_cot(g, position_spec, {}, 0);
    ASSERT_TRUE(v.transcript);
    EXPECT_DOUBLE_EQ(v.score, 0.6);  // square is not blue, relation group empty
    EXPECT_EQ(v.transcript->raw,
              "<think_start>Is there a circle? yes; Is the circle red? yes; Is there a square? yes; Is the square "
              "blue? no; Is the red circle left of the blue square? no;<think_end> <answer_start>no<answer_end>");
    EXPECT_EQ(v.transcript->final_answer, Answer::no);
    EXPECT_EQ(parse_transcript(v.transcript->raw), *v.transcript);
}

TEST(Cot, ScoreDefinition) {
    const std::vector<Answer> a{Answer::yes, Answer::no, Answer::yes, Answer::yes};
    EXPECT_EQ(transcript_score(a), 0.75);
    for (std::size_t n = 1; n < 10; ++n) {
        const std::vector<Answer> yes(n, Answer::yes);
        EXPECT_EQ(transcript_score(yes), 1.0);
        EXPECT_EQ(all_yes(yes), Answer::yes);
    }
    EXPECT_THROW(transcript_score(std::vector<Answer>{}), EmptyDecomposition);
}

TEST(Cot, EmptyDecompositionRaises) {
    const TaskSpec empty{Category::single_object, {}, {}};
    const TokenGrid g = grid_of({});
    // validation does not run here, only the decomposition guard
    EXPECT_THROW(run_cot(g, empty, {}, 0), EmptyDecomposition);
    EXPECT_THROW(run_rule(g, empty, {}, 0), EmptyDecomposition);
}

TEST(Strategies, ConsistentAtZeroFlip) {
    PlantedPredictorConfig cfg;
    cfg.epsilon = 0.4;
    const PlantedPredictor pred(cfg);
    for (int i = 0; i < 1500; ++i) {
        const TaskSpec spec = random_task_spec(all_categories[static_cast<std::size_t>(i) % 7], derive_seed(11, i));
        const TokenGrid g   = decode_iterative(pred, spec, 8, 5.0, derive_seed(12, i));
        const Verdict o = run_outcome(g, spec, {}, i), r = run_rule(g, spec, {}, i), c = run_cot(g, spec, {}, i);
        ASSERT_EQ(o.score == 1.0, r.score == 1.0);
        ASSERT_EQ(r.score, c.score);
        ASSERT_EQ(r.answers, c.answers);
    }
}

TEST(Strategies, RuleAndCotShareNoisyAnswers) {
    const TokenGrid g = grid_of({{Shape::circle, Color::red, 1, 2}, {Shape::square, Color::blue, 5, 2}});
    for (int s = 0; s < 200; ++s) {
        EXPECT_EQ(run_rule(g, position_spec, {0.3}, s).score, run_cot(g, position_spec, {0.3}, s).score);
    }
}

TEST(Strategies, ScoreLattice) {
    const PlantedPredictor pred;
    for (int i = 0; i < 300; ++i) {
        const TaskSpec spec = random_task_spec(Category::long_compositional, i);
        const TokenGrid g   = decode_iterative(pred, spec, 10, 5.0, i);
        const Verdict v     = run_cot(g, spec, {0.3}, i);
        const double n      = static_cast<double>(v.transcript->size());
        EXPECT_EQ(v.score * n, static_cast<double>(v.transcript->yes_count()));
        EXPECT_EQ(v.transcript->final_answer, all_yes(v.transcript->answers));
        EXPECT_FALSE(v.transcript->mismatched_final);
    }
}

TEST(Strategies, Dispatch) {
    const TokenGrid g = grid_of({{Shape::circle, Color::red, 1, 2}, {Shape::square, Color::blue, 5, 2}});
    for (Strategy s : all_strategies) {
        EXPECT_EQ(verify(s, g, position_spec, {}, 0).strategy, s);
        EXPECT_EQ(strategy_from_string(to_string(s)), s);
    }
    EXPECT_FALSE(strategy_from_string("vibes"));
}

// --- transcript parser -----------------------------------------------------

TEST(Transcript, ParsesExample) {
    const Transcript t =
        parse_transcript("<think_start>Is there a circle? yes; Is it red? no;<think_end> <answer_start>no<answer_end>");
    EXPECT_EQ(t.size(), 2u);
    EXPECT_EQ(t.answers, (std::vector<Answer>{Answer::yes, Answer::no}));
    EXPECT_EQ(t.questions, (std::vector<std::string>{"Is there a circle", "Is it red"}));
    EXPECT_EQ(t.final_answer, Answer::no);
    EXPECT_EQ(transcript_score(t), 0.5);
    EXPECT_FALSE(t.mismatched_final);
}

TEST(Transcript, ToleratesWhitespaceCaseAndMissingSemicolon) {
    const Transcript t = parse_transcript(
        "  <think_start>  Is there a circle ?  YES ;Is it red?No <think_end>\n<answer_start> No <answer_end>\n");
    EXPECT_EQ(t.answers, (std::vector<Answer>{Answer::yes, Answer::no}));
    EXPECT_EQ(t.questions[0], "Is there a circle");
}

TEST(Transcript, MismatchedFinalIsFlagged) {
    const Transcript t = parse_transcript("<think_start>Q? yes;<think_end> <answer_start>no<answer_end>");
    EXPECT_TRUE(t.mismatched_final);
    EXPECT_EQ(transcript_score(t), 1.0);
}

TEST(Transcript, MissingAnswerStartReportsPostThinkOffset) {
    const std::string text = "<think_start>Q? yes;<think_end> answer: yes";
    try {
        parse_transcript(text);
        FAIL();
    } catch (const MalformedTranscript & e) {
        EXPECT_EQ(e.position(), text.find("<think_end>") + std::string("<think_end>").size());
    }
}

TEST(Transcript, StructuredErrors) {
    auto position_of = [](std::string_view text) -> std::size_t {
        try {
            parse_transcript(text);
        } catch (const MalformedTranscript & e) {
            return e.position();
        }
        return std::string_view::npos;
    };
    EXPECT_EQ(position_of("Q? yes;"), 0u);                                                   // no opening marker
    EXPECT_EQ(position_of("<think_start><think_end> <answer_start>no<answer_end>"), 13u);    // no pairs
    EXPECT_EQ(position_of("<think_start>Q? maybe;<think_end> <answer_start>no<answer_end>"), 16u);
    EXPECT_EQ(position_of("<think_start>Q yes;<think_end> <answer_start>no<answer_end>"), 18u);  // unpaired
    EXPECT_EQ(position_of("<think_start>Q? yes;<think_end> <answer_start>no"), 48u);  // end of input
    EXPECT_EQ(position_of("<think_start>Q? yes;<think_end> <answer_start>no<answer_end> extra"), 61u);
    EXPECT_EQ(position_of("<think_start>Q? yes"), 19u);
}

TEST(Transcript, RoundTripOnGenerated) {
    const PlantedPredictor pred;
    for (int i = 0; i < 500; ++i) {
        const TaskSpec spec = random_task_spec(all_categories[static_cast<std::size_t>(i) % 7], derive_seed(13, i));
        const Verdict v     = run_cot(decode_iterative(pred, spec, 6, 5.0, i), spec, {0.25}, i);
        const Transcript parsed = parse_transcript(v.transcript->raw);
        ASSERT_EQ(parsed, *v.transcript);
        ASSERT_EQ(serialize(parsed).raw, v.transcript->raw);
        ASSERT_EQ(parse_transcript(serialize(parsed).raw), parsed);
    }
}

TEST(Transcript, FuzzNeverCrashes) {
    const std::string pieces[] = {"<think_start>", "<think_end>", "<answer_start>", "<answer_end>", "yes", "no", "?",
                                  ";", " ", "Is there", "\n", "<", "YES"};
    int ok = 0, malformed = 0;
    for (int i = 0; i < 20000; ++i) {
        Rng rng(derive_seed(21, i));
        std::string text;
        const auto parts = rng.below(24);
        for (std::uint64_t k = 0; k < parts; ++k) {
            if (rng.bernoulli(0.2)) {
                text += static_cast<char>(rng.below(256));
            } else {
                text += pieces[rng.below(std::size(pieces))];
            }
        }
        try {
            parse_transcript(text);
            ++ok;
        } catch (const MalformedTranscript & e) {
            ASSERT_LE(e.position(), text.size());
            ++malformed;
        }
    }
    EXPECT_EQ(ok + malformed, 20000);
}

// --- templates -------------------------------------------------------------

TEST(Templates, PlaceholdersAndFill) {
    EXPECT_NE(template_text(TemplateKind::cot).find("{prompt}"), std::string_view::npos);
    EXPECT_NE(template_text(TemplateKind::rule).find("{question}"), std::string_view::npos);
    const std::string filled = fill_template(TemplateKind::rule, "<img>", "", "Is there a circle?");
    EXPECT_EQ(filled, "<img> Is there a circle? Please answer yes or no with detail explanation.");
    const std::string outcome = fill_template(TemplateKind::outcome, "<img>", "a photo of a red circle");
    EXPECT_EQ(outcome.find('{'), std::string::npos);
}

TEST(Templates, ShippedResourcesMatch) {
    const std::pair<TemplateKind, const char *> files[] = {
        {TemplateKind::cot, "cot.txt"}, {TemplateKind::outcome, "outcome.txt"}, {TemplateKind::rule, "rule.txt"}};
    for (const auto & [kind, name] : files) {
        std::ifstream in(std::string(MASKVERIFY_SOURCE_DIR) + "/docs/templates/" + name);
        ASSERT_TRUE(in) << name;
        std::stringstream ss;
        ss << in.rdbuf();
        std::string text = ss.str();
        while (!text.empty() && text.back() == '\n') {
            text.pop_back();
        }
        EXPECT_EQ(text, template_text(kind)) << name;
    }
}
