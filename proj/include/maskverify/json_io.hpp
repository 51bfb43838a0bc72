#pragma once

// JSON schemas for Scene, TaskSpec and TokenGrid (see docs/schemas.md).
//
//   Scene     {"width":8,"height":8,"objects":[{"shape":"circle","color":"red","col":0,"row":0}]}
//   TaskSpec  {"category":"position","objects":[{"shape":"circle","color":"red","count":1},...],
//              "relations":[{"subject":0,"relation":"left_of","object":1}]}
//   TokenGrid {"width":8,"height":8,"tokens":[0,0,5,...]}

#include "maskverify/errors.hpp"
#include "maskverify/microworld.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <sstream>
#include <string>

namespace maskverify {

using json = nlohmann::json;

namespace detail {

template <typename T, typename Parse>
T enum_field(const json & j, const char * key, Parse parse) {
    const auto & text = j.at(key).get_ref<const std::string &>();
    if (auto v = parse(text)) {
        return *v;
    }
    throw SchemaError(std::string("unknown ") + key + " '" + text + "'");
}

template <typename Fn>
auto schema_guard(const char * what, Fn && fn) {
    try {
        return fn();
    } catch (const json::exception & e) {
        throw SchemaError(std::string("invalid ") + what + " JSON: " + e.what());
    }
}

}  // namespace detail

inline void to_json(json & j, const ObjectSpec & o) {
    j = json{{"shape", to_string(o.shape)}, {"color", to_string(o.color)}, {"col", o.col}, {"row", o.row}};
}

inline void to_json(json & j, const Scene & s) {
    j = json{{"width", s.width}, {"height", s.height}, {"objects", s.objects}};
}

inline void to_json(json & j, const Requirement & r) {
    j = json{{"shape", to_string(r.shape)}, {"color", to_string(r.color)}, {"count", r.count}};
}

inline void to_json(json & j, const RelationSpec & r) {
    j = json{{"subject", r.subject}, {"relation", to_string(r.relation)}, {"object", r.object}};
}

inline void to_json(json & j, const TaskSpec & s) {
    j = json{{"category", to_string(s.category)}, {"objects", s.objects}, {"relations", s.relations}};
}

inline void to_json(json & j, const TokenGrid & g) {
    j = json{{"width", g.width}, {"height", g.height}, {"tokens", g.tokens}};
}

inline Scene scene_from_json(const json & j) {
    Scene scene = detail::schema_guard("scene", [&] {
        Scene s{j.at("width").get<int>(), j.at("height").get<int>(), {}};
        for (const json & o : j.at("objects")) {
            s.objects.push_back({detail::enum_field<Shape>(o, "shape", shape_from_string),
                                 detail::enum_field<Color>(o, "color", color_from_string), o.at("col").get<int>(),
                                 o.at("row").get<int>()});
        }
        return s;
    });
    validate(scene);
    return scene;
}

inline TaskSpec spec_from_json(const json & j) {
    TaskSpec spec = detail::schema_guard("task spec", [&] {
        TaskSpec s{detail::enum_field<Category>(j, "category", category_from_string), {}, {}};
        for (const json & o : j.at("objects")) {
            s.objects.push_back({detail::enum_field<Shape>(o, "shape", shape_from_string),
                                 detail::enum_field<Color>(o, "color", color_from_string), o.at("count").get<int>()});
        }
        if (j.contains("relations")) {
            for (const json & r : j.at("relations")) {
                s.relations.push_back({r.at("subject").get<int>(),
                                       detail::enum_field<Relation>(r, "relation", relation_from_string),
                                       r.at("object").get<int>()});
            }
        }
        return s;
    });
    validate(spec);
    return spec;
}

inline TokenGrid grid_from_json(const json & j) {
    TokenGrid grid = detail::schema_guard("token grid", [&] {
        return TokenGrid{j.at("width").get<int>(), j.at("height").get<int>(), j.at("tokens").get<std::vector<Token>>()};
    });
    validate(grid);
    return grid;
}

inline json read_json_file(const std::string & path) {
    std::ifstream in(path);
    if (!in) {
        throw IoFailure("cannot open '" + path + "' for reading");
    }
    try {
        return json::parse(in);
    } catch (const json::exception & e) {
        throw SchemaError("'" + path + "' is not valid JSON: " + e.what());
    }
}

inline void write_text_file(const std::string & path, const std::string & text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoFailure("cannot open '" + path + "' for writing");
    }
    out << text;
    if (!out) {
        throw IoFailure("write to '" + path + "' failed");
    }
}

inline std::string read_text_file(const std::string & path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoFailure("cannot open '" + path + "' for reading");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace maskverify
