#pragma once

// Chain-of-thought verification transcripts.
//
//   <think_start>Q1? A1; Q2? A2;<think_end> <answer_start>A<answer_end>
//
// Answers are yes/no (case-insensitive on input, lower-case on output). The
// parser tolerates whitespace between segments and a missing ';' after the
// last pair. See docs/transcript-format.md.

#include "maskverify/errors.hpp"

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace maskverify {

enum class Answer : bool { no = false, yes = true };

inline constexpr std::string_view to_string(Answer a) { return a == Answer::yes ? "yes" : "no"; }
inline constexpr Answer to_answer(bool b) { return b ? Answer::yes : Answer::no; }

inline constexpr std::string_view think_start  = "<think_start>";
inline constexpr std::string_view think_end    = "<think_end>";
inline constexpr std::string_view answer_start = "<answer_start>";
inline constexpr std::string_view answer_end   = "<answer_end>";

struct Transcript {
    std::vector<std::string> questions;  // without the trailing '?'
    std::vector<Answer> answers;
    Answer final_answer = Answer::no;
    std::string raw;
    // Set by the parser when the stated final answer disagrees with the
    // all-yes rule. Never set on generated transcripts.
    bool mismatched_final = false;

    std::size_t size() const { return answers.size(); }

    std::size_t yes_count() const {
        return static_cast<std::size_t>(std::count(answers.begin(), answers.end(), Answer::yes));
    }

    // Structural equality: raw text is not compared.
    friend bool operator==(const Transcript & a, const Transcript & b) {
        return a.questions == b.questions && a.answers == b.answers && a.final_answer == b.final_answer &&
               a.mismatched_final == b.mismatched_final;
    }
};

// S = (1/n) * sum_j s_j with s_j = 1 iff A_j = yes.
inline double transcript_score(std::span<const Answer> answers) {
    if (answers.empty()) {
        throw EmptyDecomposition("score is undefined for zero questions");
    }
    const auto yes = std::count(answers.begin(), answers.end(), Answer::yes);
    return static_cast<double>(yes) / static_cast<double>(answers.size());
}

inline double transcript_score(const Transcript & t) { return transcript_score(std::span<const Answer>(t.answers)); }

inline Answer all_yes(std::span<const Answer> answers) {
    return to_answer(std::all_of(answers.begin(), answers.end(), [](Answer a) { return a == Answer::yes; }));
}

// Canonical surface text; the final answer follows the all-yes rule.
inline std::string serialize_transcript(std::span<const std::string> questions, std::span<const Answer> answers) {
    if (questions.size() != answers.size()) {
        throw InvalidArgument("questions and answers differ in count");
    }
    if (questions.empty()) {
        throw EmptyDecomposition("a transcript needs at least one question");
    }
    std::string raw(think_start);
    for (std::size_t i = 0; i < questions.size(); ++i) {
        const std::string & q = questions[i];
        if (q.empty() || q.find_first_of("?;<") != std::string::npos) {
            throw InvalidArgument("question text must be non-empty and free of '?', ';' and '<'");
        }
        if (i > 0) {
            raw += ' ';
        }
        raw += q;
        raw += "? ";
        raw += to_string(answers[i]);
        raw += ';';
    }
    raw += think_end;
    raw += ' ';
    raw += answer_start;
    raw += to_string(all_yes(answers));
    raw += answer_end;
    return raw;
}

inline Transcript make_transcript(std::vector<std::string> questions, std::vector<Answer> answers) {
    Transcript t;
    t.raw          = serialize_transcript(questions, answers);
    t.final_answer = all_yes(answers);
    t.questions    = std::move(questions);
    t.answers      = std::move(answers);
    return t;
}

// Re-renders a transcript in canonical form (questions and answers kept; the
// final answer is re-derived, which clears any mismatch).
inline Transcript serialize(const Transcript & t) { return make_transcript(t.questions, t.answers); }

namespace detail {

class TranscriptParser {
  public:
    explicit TranscriptParser(std::string_view text) : text_(text) {}

    Transcript parse() {
        Transcript t;
        skip_space();
        expect_marker(think_start);
        for (;;) {
            skip_space();
            if (at_marker(think_end)) {
                if (t.answers.empty()) {
                    fail("expected at least one question before " + std::string(think_end));
                }
                pos_ += think_end.size();
                break;
            }
            read_pair(t);
        }
        const std::size_t post_think = pos_;
        skip_space();
        if (!at_marker(answer_start)) {
            throw MalformedTranscript(post_think, "missing " + std::string(answer_start));
        }
        pos_ += answer_start.size();
        skip_space();
        t.final_answer = read_answer();
        skip_space();
        expect_marker(answer_end);
        skip_space();
        if (pos_ != text_.size()) {
            fail("unexpected trailing content");
        }
        t.raw              = std::string(text_);
        t.mismatched_final = t.final_answer != all_yes(t.answers);
        return t;
    }

  private:
    [[noreturn]] void fail(const std::string & why) const { throw MalformedTranscript(pos_, why); }

    void skip_space() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) {
            ++pos_;
        }
    }

    bool at_marker(std::string_view m) const { return text_.substr(pos_, m.size()) == m; }

    void expect_marker(std::string_view m) {
        if (!at_marker(m)) {
            fail("expected " + std::string(m));
        }
        pos_ += m.size();
    }

    void read_pair(Transcript & t) {
        const std::size_t q_start = pos_;
        while (pos_ < text_.size() && text_[pos_] != '?') {
            const char c = text_[pos_];
            if (c == ';' || c == '<') {
                fail("question is missing its '?'");
            }
            ++pos_;
        }
        if (pos_ >= text_.size()) {
            throw MalformedTranscript(q_start, "unterminated question");
        }
        std::string_view q = text_.substr(q_start, pos_ - q_start);
        while (!q.empty() && std::isspace(static_cast<unsigned char>(q.back()))) {
            q.remove_suffix(1);
        }
        if (q.empty()) {
            fail("empty question");
        }
        ++pos_;  // '?'
        skip_space();
        t.questions.emplace_back(q);
        t.answers.push_back(read_answer());
        skip_space();
        if (pos_ < text_.size() && text_[pos_] == ';') {
            ++pos_;
        } else if (!at_marker(think_end)) {
            fail("expected ';' after answer");
        }
    }

    Answer read_answer() {
        const std::size_t start = pos_;
        while (pos_ < text_.size() && std::isalpha(static_cast<unsigned char>(text_[pos_]))) {
            ++pos_;
        }
        std::string word(text_.substr(start, pos_ - start));
        std::transform(word.begin(), word.end(), word.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        if (word == "yes") {
            return Answer::yes;
        }
        if (word == "no") {
            return Answer::no;
        }
        throw MalformedTranscript(start, word.empty() ? "missing yes/no answer" : "answer '" + word + "' is not yes/no");
    }

    std::string_view text_;
    std::size_t pos_ = 0;
};

}  // namespace detail

inline Transcript parse_transcript(std::string_view text) { return detail::TranscriptParser(text).parse(); }

}  // namespace maskverify
