#pragma once

// Closed template grammar for task prompts. See docs/prompt-grammar.md.

#include "maskverify/errors.hpp"
#include "maskverify/microworld.hpp"

#include <array>
#include <cctype>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace maskverify {

namespace detail {

inline std::string entity_phrase(const Requirement & r) {
    if (r.count == 1) {
        return "a " + std::string(to_string(r.color)) + " " + std::string(to_string(r.shape));
    }
    return std::string(number_word(r.count)) + " " + std::string(to_string(r.color)) + " " +
           std::string(plural(r.shape));
}

inline std::string colored_phrase(const Requirement & r) {
    return "a " + std::string(to_string(r.shape)) + " colored " + std::string(to_string(r.color));
}

inline std::string definite_phrase(const Requirement & r) {
    return "the " + std::string(to_string(r.color)) + " " +
           std::string(r.count == 1 ? to_string(r.shape) : plural(r.shape));
}

}  // namespace detail

inline std::string render_prompt(const TaskSpec & spec) {
    validate(spec);
    const auto & objs = spec.objects;
    std::string out   = "a photo of ";
    switch (spec.category) {
        case Category::single_object:
        case Category::counting: out += detail::entity_phrase(objs[0]); break;
        case Category::colors: out += detail::colored_phrase(objs[0]); break;
        case Category::two_objects:
            out += detail::entity_phrase(objs[0]) + " and " + detail::entity_phrase(objs[1]);
            break;
        case Category::color_attribution:
            out += detail::colored_phrase(objs[0]) + " and " + detail::colored_phrase(objs[1]);
            break;
        case Category::position:
            out += detail::entity_phrase(objs[0]) + " " + std::string(phrase(spec.relations[0].relation)) + " " +
                   detail::entity_phrase(objs[1]);
            break;
        case Category::long_compositional: {
            for (std::size_t i = 0; i < objs.size(); ++i) {
                if (i > 0) {
                    out += i + 1 == objs.size() ? " and " : ", ";
                }
                out += detail::entity_phrase(objs[i]);
            }
            out += ", with ";
            for (std::size_t i = 0; i < spec.relations.size(); ++i) {
                const RelationSpec & r = spec.relations[i];
                if (i > 0) {
                    out += " and ";
                }
                out += detail::definite_phrase(objs[static_cast<std::size_t>(r.subject)]) + " " +
                       std::string(phrase(r.relation)) + " " +
                       detail::definite_phrase(objs[static_cast<std::size_t>(r.object)]);
            }
            break;
        }
    }
    return out;
}

namespace detail {

class PromptParser {
  public:
    explicit PromptParser(std::string_view text) : text_(text) { tokenize(); }

    TaskSpec parse() {
        expect("a");
        expect("photo");
        expect("of");
        const std::size_t body_offset = offset();

        std::vector<Entity> entities;
        entities.push_back(entity());

        TaskSpec spec;
        if (at_end()) {
            const Entity & e = entities[0];
            spec.category    = e.colored ? Category::colors : (e.req.count == 1 ? Category::single_object : Category::counting);
        } else if (auto rel = try_relation()) {
            entities.push_back(entity());
            require_plain(entities, Category::position);
            spec.category = Category::position;
            spec.relations.push_back({0, *rel, 1});
            expect_end();
        } else {
            while (peek() == ",") {
                ++pos_;
                entities.push_back(entity());
            }
            expect("and");
            entities.push_back(entity());
            if (peek() == ",") {
                ++pos_;
                expect("with");
                require_plain(entities, Category::long_compositional);
                spec.category = Category::long_compositional;
                spec.relations.push_back(relation_clause(entities));
                while (peek() == "and") {
                    ++pos_;
                    spec.relations.push_back(relation_clause(entities));
                }
                expect_end();
            } else {
                expect_end();
                if (entities.size() != 2) {
                    throw UnparsablePrompt(entities[2].offset, "lists of more than two objects need relations");
                }
                if (entities[0].colored != entities[1].colored) {
                    throw UnparsablePrompt(entities[1].offset, "cannot mix plain and 'colored' object phrases");
                }
                spec.category = entities[0].colored ? Category::color_attribution : Category::two_objects;
            }
        }
        for (const Entity & e : entities) {
            spec.objects.push_back(e.req);
        }
        try {
            validate(spec);
        } catch (const InvalidSpec & err) {
            throw UnparsablePrompt(body_offset, err.what());
        }
        return spec;
    }

  private:
    struct Word {
        std::string text;  // lower-cased
        std::size_t offset;
    };

    struct Entity {
        Requirement req;
        bool colored;
        std::size_t offset;
    };

    void tokenize() {
        std::size_t i = 0;
        while (i < text_.size()) {
            const auto c = static_cast<unsigned char>(text_[i]);
            if (std::isspace(c)) {
                ++i;
                continue;
            }
            if (c == ',') {
                words_.push_back({",", i});
                ++i;
                continue;
            }
            const std::size_t start = i;
            std::string w;
            while (i < text_.size() && !std::isspace(static_cast<unsigned char>(text_[i])) && text_[i] != ',') {
                w.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(text_[i]))));
                ++i;
            }
            words_.push_back({std::move(w), start});
        }
    }

    bool at_end() const { return pos_ >= words_.size(); }
    std::size_t offset() const { return at_end() ? text_.size() : words_[pos_].offset; }
    std::string_view peek(std::size_t ahead = 0) const {
        return pos_ + ahead < words_.size() ? std::string_view(words_[pos_ + ahead].text) : std::string_view();
    }

    [[noreturn]] void fail(const std::string & why) const { throw UnparsablePrompt(offset(), why); }

    void expect(std::string_view w) {
        if (peek() != w || at_end()) {
            fail(at_end() ? "unexpected end of prompt, expected '" + std::string(w) + "'"
                          : "expected '" + std::string(w) + "', found '" + std::string(peek()) + "'");
        }
        ++pos_;
    }

    void expect_end() {
        if (!at_end()) {
            fail("unexpected trailing text '" + std::string(peek()) + "'");
        }
    }

    Color color() {
        if (auto c = color_from_string(peek()); c && !at_end()) {
            ++pos_;
            return *c;
        }
        fail(at_end() ? "unexpected end of prompt, expected a color" : "unknown color '" + std::string(peek()) + "'");
    }

    Shape shape(bool plural_form) {
        for (Shape s : all_shapes) {
            if (!at_end() && peek() == (plural_form ? plural(s) : to_string(s))) {
                ++pos_;
                return s;
            }
        }
        fail(at_end() ? "unexpected end of prompt, expected a shape"
                      : std::string(plural_form ? "expected a plural shape, found '" : "expected a shape, found '") +
                            std::string(peek()) + "'");
    }

    Entity entity() {
        const std::size_t start = offset();
        int count               = 0;
        const auto w            = peek();
        if (w == "a" || w == "an" || w == "one") {
            count = 1;
        } else {
            for (int n = 2; n <= 4; ++n) {
                if (w == number_word(n)) {
                    count = n;
                }
            }
        }
        if (count == 0 || at_end()) {
            fail(at_end() ? "unexpected end of prompt, expected an object" : "expected an article or number word, found '" +
                                                                                std::string(w) + "'");
        }
        ++pos_;
        if (count == 1 && !at_end() && !color_from_string(peek())) {
            // "a <shape> colored <color>"
            const Shape s = shape(false);
            expect("colored");
            const Color c = color();
            return {{s, c, 1}, true, start};
        }
        const Color c = color();
        const Shape s = shape(count > 1);
        return {{s, c, count}, false, start};
    }

    std::optional<Relation> try_relation() {
        if (peek() == "left" && peek(1) == "of") {
            pos_ += 2;
            return Relation::left_of;
        }
        if (peek() == "right" && peek(1) == "of") {
            pos_ += 2;
            return Relation::right_of;
        }
        if (peek() == "above") {
            ++pos_;
            return Relation::above;
        }
        if (peek() == "below") {
            ++pos_;
            return Relation::below;
        }
        return std::nullopt;
    }

    void require_plain(const std::vector<Entity> & entities, Category cat) const {
        for (const Entity & e : entities) {
            if (e.colored) {
                throw UnparsablePrompt(e.offset, "'colored' phrases are not allowed in " + std::string(to_string(cat)) +
                                                     " prompts");
            }
        }
    }

    int entity_ref(const std::vector<Entity> & entities) {
        const std::size_t start = offset();
        expect("the");
        const Color c = color();
        const bool plural_form = std::any_of(all_shapes.begin(), all_shapes.end(),
                                             [&](Shape s) { return peek() == plural(s); });
        const Shape s = shape(plural_form);
        for (std::size_t i = 0; i < entities.size(); ++i) {
            if (entities[i].req.shape == s && entities[i].req.color == c) {
                return static_cast<int>(i);
            }
        }
        throw UnparsablePrompt(start, "relation refers to an object not listed in the prompt");
    }

    RelationSpec relation_clause(const std::vector<Entity> & entities) {
        const int subject = entity_ref(entities);
        const auto rel    = try_relation();
        if (!rel) {
            fail(at_end() ? "unexpected end of prompt, expected a relation"
                          : "expected a relation, found '" + std::string(peek()) + "'");
        }
        const int object = entity_ref(entities);
        return {subject, *rel, object};
    }

    std::string_view text_;
    std::vector<Word> words_;
    std::size_t pos_ = 0;
};

}  // namespace detail

inline TaskSpec parse_prompt(std::string_view text) { return detail::PromptParser(text).parse(); }

}  // namespace maskverify
