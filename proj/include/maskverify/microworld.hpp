#pragma once

// The synthetic scene domain: objects on a cell grid, the task specifications
// prompts are drawn from, the invertible cell tokenizer, and the exact
// category oracle every other module is measured against.

#include "maskverify/errors.hpp"
#include "maskverify/random.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace maskverify {

enum class Shape : std::uint8_t { circle, square, triangle, cross };
enum class Color : std::uint8_t { red, green, blue, yellow };
enum class Relation : std::uint8_t { left_of, right_of, above, below };
enum class Category : std::uint8_t {
    single_object,
    two_objects,
    counting,
    colors,
    position,
    color_attribution,
    long_compositional,
};

inline constexpr std::array<Shape, 4> all_shapes{Shape::circle, Shape::square, Shape::triangle, Shape::cross};
inline constexpr std::array<Color, 4> all_colors{Color::red, Color::green, Color::blue, Color::yellow};
inline constexpr std::array<Relation, 4> all_relations{Relation::left_of, Relation::right_of, Relation::above,
                                                       Relation::below};
inline constexpr std::array<Category, 7> all_categories{
    Category::single_object, Category::two_objects,       Category::counting,          Category::colors,
    Category::position,      Category::color_attribution, Category::long_compositional,
};
// The six GenEval-style categories used by the default benchmark suite.
inline constexpr std::array<Category, 6> geneval_categories{
    Category::single_object, Category::two_objects, Category::counting,
    Category::colors,        Category::position,    Category::color_attribution,
};

inline constexpr std::string_view to_string(Shape s) {
    constexpr std::array<std::string_view, 4> names{"circle", "square", "triangle", "cross"};
    return names[static_cast<std::size_t>(s)];
}

inline constexpr std::string_view plural(Shape s) {
    constexpr std::array<std::string_view, 4> names{"circles", "squares", "triangles", "crosses"};
    return names[static_cast<std::size_t>(s)];
}

inline constexpr std::string_view to_string(Color c) {
    constexpr std::array<std::string_view, 4> names{"red", "green", "blue", "yellow"};
    return names[static_cast<std::size_t>(c)];
}

inline constexpr std::string_view to_string(Relation r) {
    constexpr std::array<std::string_view, 4> names{"left_of", "right_of", "above", "below"};
    return names[static_cast<std::size_t>(r)];
}

// Surface phrase used in prompts and questions.
inline constexpr std::string_view phrase(Relation r) {
    constexpr std::array<std::string_view, 4> names{"left of", "right of", "above", "below"};
    return names[static_cast<std::size_t>(r)];
}

inline constexpr std::string_view to_string(Category c) {
    constexpr std::array<std::string_view, 7> names{
        "single_object", "two_objects", "counting", "colors", "position", "color_attribution", "long_compositional",
    };
    return names[static_cast<std::size_t>(c)];
}

template <typename Enum, std::size_t N>
std::optional<Enum> enum_from_string(std::string_view text, const std::array<Enum, N> & values) {
    for (Enum v : values) {
        if (to_string(v) == text) {
            return v;
        }
    }
    return std::nullopt;
}

inline std::optional<Shape> shape_from_string(std::string_view t) { return enum_from_string(t, all_shapes); }
inline std::optional<Color> color_from_string(std::string_view t) { return enum_from_string(t, all_colors); }
inline std::optional<Relation> relation_from_string(std::string_view t) { return enum_from_string(t, all_relations); }
inline std::optional<Category> category_from_string(std::string_view t) { return enum_from_string(t, all_categories); }

inline constexpr std::string_view number_word(int n) {
    constexpr std::array<std::string_view, 5> words{"zero", "one", "two", "three", "four"};
    return n >= 0 && n < static_cast<int>(words.size()) ? words[static_cast<std::size_t>(n)] : "many";
}

inline constexpr Relation converse(Relation r) {
    switch (r) {
        case Relation::left_of: return Relation::right_of;
        case Relation::right_of: return Relation::left_of;
        case Relation::above: return Relation::below;
        case Relation::below: return Relation::above;
    }
    return r;
}

struct GridSize {
    int width  = 8;
    int height = 8;

    int cells() const { return width * height; }
    bool operator==(const GridSize &) const = default;
};

struct ObjectSpec {
    Shape shape{};
    Color color{};
    int col = 0;
    int row = 0;

    bool operator==(const ObjectSpec &) const = default;
};

struct Scene {
    int width  = 8;
    int height = 8;
    std::vector<ObjectSpec> objects;

    GridSize size() const { return {width, height}; }

    // Objects sorted row-major by anchor; the representation produced by
    // grid_to_scene.
    Scene canonical() const {
        Scene out = *this;
        std::sort(out.objects.begin(), out.objects.end(), [](const ObjectSpec & a, const ObjectSpec & b) {
            return a.row != b.row ? a.row < b.row : a.col < b.col;
        });
        return out;
    }

    // Scenes are sets of objects: equality ignores list order.
    friend bool operator==(const Scene & a, const Scene & b) {
        if (a.width != b.width || a.height != b.height || a.objects.size() != b.objects.size()) {
            return false;
        }
        return a.canonical().objects == b.canonical().objects;
    }
};

// One required entity. count == 1 means presence (at least one object of this
// shape and color); count >= 2 means an exact count over the shape class with
// every member carrying the color.
struct Requirement {
    Shape shape{};
    Color color{};
    int count = 1;

    bool operator==(const Requirement &) const = default;
};

struct RelationSpec {
    int subject = 0;
    Relation relation{};
    int object = 1;

    bool operator==(const RelationSpec &) const = default;
};

struct TaskSpec {
    Category category{};
    std::vector<Requirement> objects;
    std::vector<RelationSpec> relations;

    int total_count() const {
        return std::accumulate(objects.begin(), objects.end(), 0,
                               [](int acc, const Requirement & r) { return acc + r.count; });
    }

    bool operator==(const TaskSpec &) const = default;
};

// ---------------------------------------------------------------------------
// Tokens

using Token = std::uint16_t;

inline constexpr Token background_token = 0;
inline constexpr Token mask_token       = 17;
// Tokens a predictor may emit (everything except MASK).
inline constexpr std::size_t predict_vocab_size = 17;
inline constexpr std::size_t vocab_size         = 18;

inline constexpr Token object_token(Shape s, Color c) {
    return static_cast<Token>(1 + static_cast<int>(s) * 4 + static_cast<int>(c));
}

inline constexpr bool is_object_token(Token t) { return t >= 1 && t <= 16; }

inline constexpr Shape token_shape(Token t) { return static_cast<Shape>((t - 1) / 4); }
inline constexpr Color token_color(Token t) { return static_cast<Color>((t - 1) % 4); }

struct TokenGrid {
    int width  = 8;
    int height = 8;
    std::vector<Token> tokens;

    static TokenGrid filled(GridSize size, Token value) {
        return TokenGrid{size.width, size.height, std::vector<Token>(static_cast<std::size_t>(size.cells()), value)};
    }

    std::size_t size() const { return tokens.size(); }
    GridSize dims() const { return {width, height}; }
    Token at(int col, int row) const { return tokens[static_cast<std::size_t>(row * width + col)]; }

    bool complete() const { return std::find(tokens.begin(), tokens.end(), mask_token) == tokens.end(); }

    std::size_t masked_count() const {
        return static_cast<std::size_t>(std::count(tokens.begin(), tokens.end(), mask_token));
    }

    bool operator==(const TokenGrid &) const = default;
};

// ---------------------------------------------------------------------------
// Validation

inline void validate(const Scene & scene) {
    if (scene.width < 1 || scene.height < 1) {
        throw InvalidScene("grid dimensions must be positive");
    }
    std::vector<bool> used(static_cast<std::size_t>(scene.width * scene.height), false);
    for (const ObjectSpec & o : scene.objects) {
        if (o.col < 0 || o.col >= scene.width || o.row < 0 || o.row >= scene.height) {
            throw InvalidScene("object anchor (" + std::to_string(o.col) + "," + std::to_string(o.row) +
                               ") outside the grid");
        }
        auto cell = static_cast<std::size_t>(o.row * scene.width + o.col);
        if (used[cell]) {
            throw InvalidScene("two objects share cell (" + std::to_string(o.col) + "," + std::to_string(o.row) + ")");
        }
        used[cell] = true;
    }
}

inline void validate(const TaskSpec & spec) {
    const auto n = spec.objects.size();
    auto fail    = [&](const std::string & why) {
        throw InvalidSpec(std::string(to_string(spec.category)) + ": " + why);
    };
    auto expect_objects = [&](std::size_t lo, std::size_t hi) {
        if (n < lo || n > hi) {
            fail("expected " + std::to_string(lo) + (lo == hi ? "" : "-" + std::to_string(hi)) +
                 " required objects, got " + std::to_string(n));
        }
    };
    auto expect_unit_counts = [&] {
        for (const Requirement & r : spec.objects) {
            if (r.count != 1) {
                fail("presence requirements must have count 1");
            }
        }
    };
    auto expect_no_relations = [&] {
        if (!spec.relations.empty()) {
            fail("relations are not allowed in this category");
        }
    };

    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (spec.objects[i].shape == spec.objects[j].shape) {
                fail("required objects must have distinct shapes");
            }
        }
        if (spec.objects[i].count < 1 || spec.objects[i].count > 4) {
            fail("object counts must lie in [1,4]");
        }
    }
    for (const RelationSpec & r : spec.relations) {
        if (r.subject < 0 || r.object < 0 || static_cast<std::size_t>(r.subject) >= n ||
            static_cast<std::size_t>(r.object) >= n || r.subject == r.object) {
            fail("relation references an invalid object index");
        }
    }

    switch (spec.category) {
        case Category::single_object:
        case Category::colors:
            expect_objects(1, 1);
            expect_unit_counts();
            expect_no_relations();
            break;
        case Category::two_objects:
            expect_objects(2, 2);
            expect_unit_counts();
            expect_no_relations();
            break;
        case Category::color_attribution:
            expect_objects(2, 2);
            expect_unit_counts();
            expect_no_relations();
            if (spec.objects[0].color == spec.objects[1].color) {
                fail("color attribution needs two distinct colors");
            }
            break;
        case Category::counting:
            expect_objects(1, 1);
            expect_no_relations();
            if (spec.objects[0].count < 2 || spec.objects[0].count > 4) {
                fail("counting requires a count in [2,4]");
            }
            break;
        case Category::position:
            expect_objects(2, 2);
            expect_unit_counts();
            if (spec.relations.size() != 1 || spec.relations[0].subject != 0 || spec.relations[0].object != 1) {
                fail("position requires exactly one relation from object 0 to object 1");
            }
            break;
        case Category::long_compositional: {
            expect_objects(2, 4);
            const int total = spec.total_count();
            if (total < 4 || total > 6) {
                fail("long compositional prompts require 4-6 objects in total");
            }
            if (spec.relations.size() < 2) {
                fail("long compositional prompts require at least two relations");
            }
            for (std::size_t i = 0; i < spec.relations.size(); ++i) {
                for (std::size_t j = i + 1; j < spec.relations.size(); ++j) {
                    const auto & a = spec.relations[i];
                    const auto & b = spec.relations[j];
                    if ((a.subject == b.subject && a.object == b.object) ||
                        (a.subject == b.object && a.object == b.subject)) {
                        fail("at most one relation per object pair");
                    }
                }
            }
            break;
        }
    }
}

inline bool is_valid(const TaskSpec & spec) {
    try {
        validate(spec);
        return true;
    } catch (const InvalidSpec &) {
        return false;
    }
}

// ---------------------------------------------------------------------------
// Tokenizer (one object per cell, patch size 1)

inline TokenGrid scene_to_grid(const Scene & scene) {
    validate(scene);
    TokenGrid grid = TokenGrid::filled(scene.size(), background_token);
    for (const ObjectSpec & o : scene.objects) {
        grid.tokens[static_cast<std::size_t>(o.row * scene.width + o.col)] = object_token(o.shape, o.color);
    }
    return grid;
}

inline void validate(const TokenGrid & grid) {
    if (grid.width < 1 || grid.height < 1 || grid.tokens.size() != static_cast<std::size_t>(grid.width * grid.height)) {
        throw InvalidGrid("token count does not match grid dimensions");
    }
    for (Token t : grid.tokens) {
        if (t >= vocab_size) {
            throw InvalidGrid("token index " + std::to_string(t) + " outside the vocabulary");
        }
    }
}

inline Scene grid_to_scene(const TokenGrid & grid) {
    validate(grid);
    if (!grid.complete()) {
        throw IncompleteGrid("grid still contains " + std::to_string(grid.masked_count()) + " MASK tokens");
    }
    Scene scene{grid.width, grid.height, {}};
    for (int row = 0; row < grid.height; ++row) {
        for (int col = 0; col < grid.width; ++col) {
            const Token t = grid.at(col, row);
            if (is_object_token(t)) {
                scene.objects.push_back({token_shape(t), token_color(t), col, row});
            }
        }
    }
    return scene;
}

// ---------------------------------------------------------------------------
// Scene queries shared by the oracle and the atomic-question checks.

inline int count_shape(const Scene & scene, Shape s) {
    return static_cast<int>(
        std::count_if(scene.objects.begin(), scene.objects.end(), [&](const ObjectSpec & o) { return o.shape == s; }));
}

inline int count_object(const Scene & scene, Shape s, Color c) {
    return static_cast<int>(std::count_if(scene.objects.begin(), scene.objects.end(),
                                          [&](const ObjectSpec & o) { return o.shape == s && o.color == c; }));
}

inline bool anchor_relation(const ObjectSpec & a, Relation rel, const ObjectSpec & b) {
    switch (rel) {
        case Relation::left_of: return a.col < b.col;
        case Relation::right_of: return a.col > b.col;
        case Relation::above: return a.row < b.row;
        case Relation::below: return a.row > b.row;
    }
    return false;
}

// Holds iff both (shape, color) groups are non-empty and every subject
// instance stands in `rel` to every object instance.
inline bool group_relation(const Scene & scene, Shape s1, Color c1, Relation rel, Shape s2, Color c2) {
    bool any_subject = false;
    bool any_object  = false;
    for (const ObjectSpec & a : scene.objects) {
        if (a.shape != s1 || a.color != c1) {
            continue;
        }
        any_subject = true;
        for (const ObjectSpec & b : scene.objects) {
            if (b.shape != s2 || b.color != c2) {
                continue;
            }
            any_object = true;
            if (!anchor_relation(a, rel, b)) {
                return false;
            }
        }
    }
    return any_subject && any_object;
}

// ---------------------------------------------------------------------------
// Oracle

struct RequirementCheck {
    std::string description;
    bool pass = false;

    bool operator==(const RequirementCheck &) const = default;
};

struct CategoryVerdict {
    bool pass = false;
    std::vector<RequirementCheck> checks;

    bool operator==(const CategoryVerdict &) const = default;
};

inline bool requirement_met(const Scene & scene, const Requirement & req) {
    if (req.count == 1) {
        return count_object(scene, req.shape, req.color) >= 1;
    }
    return count_shape(scene, req.shape) == req.count && count_object(scene, req.shape, req.color) == req.count;
}

// Exact GenEval-style judgement of a scene against a task.
//   * count 1: at least one object of that shape and color.
//   * count k >= 2: exactly k objects of the shape, all of that color.
//   * relations: compare anchors of every subject/object instance pair
//     (left_of: subject.col < object.col, above: subject.row < object.row).
inline CategoryVerdict oracle_check(const Scene & scene, const TaskSpec & spec) {
    CategoryVerdict verdict{true, {}};
    for (const Requirement & req : spec.objects) {
        std::string what = req.count == 1 ? "presence of a " : "exactly " + std::to_string(req.count) + " ";
        what += std::string(to_string(req.color)) + " " +
                std::string(req.count == 1 ? to_string(req.shape) : plural(req.shape));
        const bool ok = requirement_met(scene, req);
        verdict.checks.push_back({std::move(what), ok});
        verdict.pass = verdict.pass && ok;
    }
    for (const RelationSpec & rel : spec.relations) {
        const Requirement & a = spec.objects.at(static_cast<std::size_t>(rel.subject));
        const Requirement & b = spec.objects.at(static_cast<std::size_t>(rel.object));
        const bool ok         = group_relation(scene, a.shape, a.color, rel.relation, b.shape, b.color);
        verdict.checks.push_back({std::string(to_string(a.color)) + " " + std::string(to_string(a.shape)) + " " +
                                      std::string(to_string(rel.relation)) + " " + std::string(to_string(b.color)) +
                                      " " + std::string(to_string(b.shape)),
                                  ok});
        verdict.pass = verdict.pass && ok;
    }
    return verdict;
}

// ---------------------------------------------------------------------------
// Scene sampling

namespace detail {

// Orders entities along one axis: edge (a, b) means every cell of a has a
// smaller coordinate than every cell of b.
inline std::vector<std::pair<int, int>> axis_edges(const TaskSpec & spec, bool columns) {
    std::vector<std::pair<int, int>> edges;
    for (const RelationSpec & r : spec.relations) {
        switch (r.relation) {
            case Relation::left_of:
                if (columns) edges.emplace_back(r.subject, r.object);
                break;
            case Relation::right_of:
                if (columns) edges.emplace_back(r.object, r.subject);
                break;
            case Relation::above:
                if (!columns) edges.emplace_back(r.subject, r.object);
                break;
            case Relation::below:
                if (!columns) edges.emplace_back(r.object, r.subject);
                break;
        }
    }
    return edges;
}

// Random topological order of `n` nodes; nullopt when the edges have a cycle.
inline std::optional<std::vector<int>> random_linear_extension(int n, const std::vector<std::pair<int, int>> & edges,
                                                               Rng & rng) {
    std::vector<int> indegree(static_cast<std::size_t>(n), 0);
    for (auto [a, b] : edges) {
        ++indegree[static_cast<std::size_t>(b)];
    }
    std::vector<int> order;
    std::vector<bool> placed(static_cast<std::size_t>(n), false);
    while (static_cast<int>(order.size()) < n) {
        std::vector<int> ready;
        for (int v = 0; v < n; ++v) {
            if (!placed[static_cast<std::size_t>(v)] && indegree[static_cast<std::size_t>(v)] == 0) {
                ready.push_back(v);
            }
        }
        if (ready.empty()) {
            return std::nullopt;
        }
        const int pick = ready[rng.below(ready.size())];
        placed[static_cast<std::size_t>(pick)] = true;
        order.push_back(pick);
        for (auto [a, b] : edges) {
            if (a == pick) {
                --indegree[static_cast<std::size_t>(b)];
            }
        }
    }
    return order;
}

// Splits [0, extent) into `parts` consecutive bands whose sizes differ by at
// most one; returns band start offsets plus the end sentinel.
inline std::vector<int> split_bands(int extent, int parts, Rng & rng) {
    std::vector<int> sizes(static_cast<std::size_t>(parts), extent / parts);
    std::vector<int> idx(static_cast<std::size_t>(parts));
    std::iota(idx.begin(), idx.end(), 0);
    rng.shuffle(idx);
    for (int i = 0; i < extent % parts; ++i) {
        ++sizes[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])];
    }
    std::vector<int> starts{0};
    for (int s : sizes) {
        starts.push_back(starts.back() + s);
    }
    return starts;
}

inline bool relations_hold(const Scene & scene, const TaskSpec & spec) {
    for (const RelationSpec & rel : spec.relations) {
        const Requirement & a = spec.objects[static_cast<std::size_t>(rel.subject)];
        const Requirement & b = spec.objects[static_cast<std::size_t>(rel.object)];
        if (!group_relation(scene, a.shape, a.color, rel.relation, b.shape, b.color)) {
            return false;
        }
    }
    return true;
}

}  // namespace detail

// Places exactly the required objects at distinct cells so that the scene
// passes oracle_check against `spec`. Uniform rejection sampling is tried
// first; if relations make that slow, entities are laid out in disjoint
// column/row bands ordered consistently with the relations.
inline Scene sample_scene(const TaskSpec & spec, std::uint64_t seed, GridSize size = {}) {
    validate(spec);
    if (size.width < 1 || size.height < 1) {
        throw InvalidArgument("grid dimensions must be positive");
    }
    const int total = spec.total_count();
    if (total > size.cells()) {
        throw InfeasibleSpec("spec requires " + std::to_string(total) + " objects but the grid has only " +
                             std::to_string(size.cells()) + " cells");
    }
    const int n_entities = static_cast<int>(spec.objects.size());
    Rng rng(seed);

    const auto col_edges = detail::axis_edges(spec, true);
    const auto row_edges = detail::axis_edges(spec, false);
    {
        Rng probe(0);
        if (!detail::random_linear_extension(n_entities, col_edges, probe) ||
            !detail::random_linear_extension(n_entities, row_edges, probe)) {
            throw InfeasibleSpec("relations are cyclic and cannot all hold");
        }
    }

    std::vector<int> cells(static_cast<std::size_t>(size.cells()));
    std::iota(cells.begin(), cells.end(), 0);

    constexpr int max_rejection_tries = 256;
    for (int attempt = 0; attempt < max_rejection_tries; ++attempt) {
        // partial Fisher-Yates: first `total` cells are a uniform sample
        for (int i = 0; i < total; ++i) {
            const auto j = static_cast<std::size_t>(i) + rng.below(cells.size() - static_cast<std::size_t>(i));
            std::swap(cells[static_cast<std::size_t>(i)], cells[j]);
        }
        Scene scene{size.width, size.height, {}};
        int next = 0;
        for (const Requirement & req : spec.objects) {
            for (int k = 0; k < req.count; ++k) {
                const int cell = cells[static_cast<std::size_t>(next++)];
                scene.objects.push_back({req.shape, req.color, cell % size.width, cell / size.width});
            }
        }
        if (detail::relations_hold(scene, spec)) {
            return scene.canonical();
        }
    }

    // Banded construction.
    if (n_entities > size.width || n_entities > size.height) {
        throw InfeasibleSpec("grid too small to separate " + std::to_string(n_entities) + " related objects");
    }
    const auto col_order = *detail::random_linear_extension(n_entities, col_edges, rng);
    const auto row_order = *detail::random_linear_extension(n_entities, row_edges, rng);
    const auto col_bands = detail::split_bands(size.width, n_entities, rng);
    const auto row_bands = detail::split_bands(size.height, n_entities, rng);

    Scene scene{size.width, size.height, {}};
    for (int slot = 0; slot < n_entities; ++slot) {
        const int entity   = col_order[static_cast<std::size_t>(slot)];
        const auto row_pos = std::find(row_order.begin(), row_order.end(), entity) - row_order.begin();
        const int c0       = col_bands[static_cast<std::size_t>(slot)];
        const int c1       = col_bands[static_cast<std::size_t>(slot) + 1];
        const int r0       = row_bands[static_cast<std::size_t>(row_pos)];
        const int r1       = row_bands[static_cast<std::size_t>(row_pos) + 1];
        const Requirement & req = spec.objects[static_cast<std::size_t>(entity)];
        std::vector<std::pair<int, int>> rect;
        for (int r = r0; r < r1; ++r) {
            for (int c = c0; c < c1; ++c) {
                rect.emplace_back(c, r);
            }
        }
        if (static_cast<int>(rect.size()) < req.count) {
            throw InfeasibleSpec("grid too small to place " + std::to_string(req.count) + " " +
                                 std::string(plural(req.shape)) + " under the required relations");
        }
        rng.shuffle(rect);
        for (int k = 0; k < req.count; ++k) {
            scene.objects.push_back({req.shape, req.color, rect[static_cast<std::size_t>(k)].first,
                                     rect[static_cast<std::size_t>(k)].second});
        }
    }
    return scene.canonical();
}

// Draws a random valid spec of the given category. Long compositional specs
// are redrawn until their relations are feasible on `size`.
inline TaskSpec random_task_spec(Category category, std::uint64_t seed, GridSize size = {}) {
    Rng rng(seed);
    auto distinct_shapes = [&](int n) {
        std::vector<Shape> shapes(all_shapes.begin(), all_shapes.end());
        rng.shuffle(shapes);
        shapes.resize(static_cast<std::size_t>(n));
        return shapes;
    };
    auto any_color = [&] { return all_colors[rng.below(all_colors.size())]; };

    TaskSpec spec{category, {}, {}};
    switch (category) {
        case Category::single_object:
        case Category::colors: {
            spec.objects.push_back({all_shapes[rng.below(4)], any_color(), 1});
            break;
        }
        case Category::two_objects: {
            for (Shape s : distinct_shapes(2)) {
                spec.objects.push_back({s, any_color(), 1});
            }
            break;
        }
        case Category::color_attribution: {
            auto shapes = distinct_shapes(2);
            std::vector<Color> colors(all_colors.begin(), all_colors.end());
            rng.shuffle(colors);
            spec.objects.push_back({shapes[0], colors[0], 1});
            spec.objects.push_back({shapes[1], colors[1], 1});
            break;
        }
        case Category::counting: {
            spec.objects.push_back({all_shapes[rng.below(4)], any_color(), rng.between(2, 4)});
            break;
        }
        case Category::position: {
            for (Shape s : distinct_shapes(2)) {
                spec.objects.push_back({s, any_color(), 1});
            }
            spec.relations.push_back({0, all_relations[rng.below(4)], 1});
            break;
        }
        case Category::long_compositional: {
            for (;;) {
                const int n = rng.between(2, 4);
                std::vector<int> counts(static_cast<std::size_t>(n), 1);
                const int target = rng.between(std::max(4, n), 6);
                for (int extra = target - n; extra > 0;) {
                    auto & c = counts[rng.below(counts.size())];
                    if (c < 4) {
                        ++c;
                        --extra;
                    }
                }
                spec.objects.clear();
                auto shapes = distinct_shapes(n);
                for (int i = 0; i < n; ++i) {
                    spec.objects.push_back({shapes[static_cast<std::size_t>(i)], any_color(),
                                            counts[static_cast<std::size_t>(i)]});
                }
                std::vector<std::pair<int, int>> pairs;
                for (int a = 0; a < n; ++a) {
                    for (int b = a + 1; b < n; ++b) {
                        pairs.emplace_back(a, b);
                    }
                }
                rng.shuffle(pairs);
                const int n_rel = std::min<int>(static_cast<int>(pairs.size()), rng.between(2, 3));
                if (n_rel < 2) {
                    continue;
                }
                spec.relations.clear();
                for (int i = 0; i < n_rel; ++i) {
                    auto [a, b] = pairs[static_cast<std::size_t>(i)];
                    if (rng.bernoulli(0.5)) {
                        std::swap(a, b);
                    }
                    spec.relations.push_back({a, all_relations[rng.below(4)], b});
                }
                try {
                    sample_scene(spec, derive_seed(seed, Stream::suite), size);
                    return spec;
                } catch (const InfeasibleSpec &) {
                    continue;
                }
            }
        }
    }
    return spec;
}

}  // namespace maskverify
