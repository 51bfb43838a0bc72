#pragma once

// Verification prompt templates for a multimodal verifier, with {image},
// {prompt} and {question} placeholders. Copies live in docs/templates/.

#include <string>
#include <string_view>

namespace maskverify {

enum class TemplateKind { cot, outcome, rule };

inline constexpr std::string_view cot_template =
    "{image} This image is generated by a prompt: {prompt}. Please assess the image generation quality step by "
    "step. First, breakdown the prompt into multiple visual questions and iteratively answer each question with Yes "
    "or No between <think_start> <think_end>. Questions should cover all-round details about whether the image "
    "accurately represents entity categories, counting of entities, color, spatial relationship in the prompt. Next, "
    "output the final result between <answer_start> <answer_end>. Output Yes if all multi-choice answers equal yes "
    "to show the image has accurate alignment with the prompt. Otherwise answer with No.";

inline constexpr std::string_view outcome_template =
    "{image} This image is generated by a prompt: {prompt}. Does this image accurately represent the prompt? Please "
    "answer yes or no.";

inline constexpr std::string_view rule_template =
    "{image} {question} Please answer yes or no with detail explanation.";

inline constexpr std::string_view template_text(TemplateKind kind) {
    switch (kind) {
        case TemplateKind::cot: return cot_template;
        case TemplateKind::outcome: return outcome_template;
        case TemplateKind::rule: return rule_template;
    }
    return {};
}

// Substitutes every {image}, {prompt} and {question} placeholder.
inline std::string fill_template(TemplateKind kind, std::string_view image, std::string_view prompt,
                                 std::string_view question = {}) {
    std::string out(template_text(kind));
    auto replace_all = [&out](std::string_view key, std::string_view value) {
        for (std::size_t at = out.find(key); at != std::string::npos; at = out.find(key, at + value.size())) {
            out.replace(at, key.size(), value);
        }
    };
    replace_all("{image}", image);
    replace_all("{prompt}", prompt);
    replace_all("{question}", question);
    return out;
}

}  // namespace maskverify
