#pragma once

// A small JSON-Schema checker covering the subset our shipped schemas use:
// type, properties, required, items, enum, minimum, maximum, minItems,
// maxItems, and boolean additionalProperties.  Returns human-readable
// violations with JSON-pointer-style paths instead of throwing, so callers
// can report all problems at once.

#include <string>
#include <vector>

#include <json.hpp>

namespace silofactor {

using Json = nlohmann::json;

namespace detail {

inline bool matches_type(const Json& value, const std::string& type) {
    if (type == "object") return value.is_object();
    if (type == "array") return value.is_array();
    if (type == "string") return value.is_string();
    if (type == "number") return value.is_number();
    if (type == "integer") return value.is_number_integer();
    if (type == "boolean") return value.is_boolean();
    if (type == "null") return value.is_null();
    return false;
}

inline std::string json_type_name(const Json& value) {
    switch (value.type()) {
        case Json::value_t::object: return "object";
        case Json::value_t::array: return "array";
        case Json::value_t::string: return "string";
        case Json::value_t::boolean: return "boolean";
        case Json::value_t::number_integer:
        case Json::value_t::number_unsigned: return "integer";
        case Json::value_t::number_float: return "number";
        case Json::value_t::null: return "null";
        default: return "unknown";
    }
}

inline void check_schema_at(const Json& schema, const Json& value, const std::string& path,
                            std::vector<std::string>& out) {
    if (schema.contains("type")) {
        const auto& type = schema.at("type");
        bool ok = false;
        if (type.is_array()) {
            for (const auto& t : type) ok = ok || matches_type(value, t.get<std::string>());
        } else {
            ok = matches_type(value, type.get<std::string>());
        }
        if (!ok) {
            out.push_back(path + ": expected " + type.dump() + ", got " + json_type_name(value));
            return;  // further keyword checks would only cascade
        }
    }

    if (schema.contains("enum")) {
        bool found = false;
        for (const auto& candidate : schema.at("enum")) found = found || candidate == value;
        if (!found)
            out.push_back(path + ": value " + value.dump() + " not in " +
                          schema.at("enum").dump());
    }

    if (value.is_number()) {
        if (schema.contains("minimum") && value.get<double>() < schema.at("minimum").get<double>())
            out.push_back(path + ": " + value.dump() + " below minimum " +
                          schema.at("minimum").dump());
        if (schema.contains("maximum") && value.get<double>() > schema.at("maximum").get<double>())
            out.push_back(path + ": " + value.dump() + " above maximum " +
                          schema.at("maximum").dump());
    }

    if (value.is_object()) {
        if (schema.contains("required"))
            for (const auto& name : schema.at("required"))
                if (!value.contains(name.get<std::string>()))
                    out.push_back(path + ": missing required property \"" +
                                  name.get<std::string>() + "\"");
        const Json* props = schema.contains("properties") ? &schema.at("properties") : nullptr;
        for (const auto& [key, child] : value.items()) {
            if (props && props->contains(key)) {
                check_schema_at(props->at(key), child, path + "/" + key, out);
            } else if (schema.contains("additionalProperties") &&
                       schema.at("additionalProperties").is_boolean() &&
                       !schema.at("additionalProperties").get<bool>()) {
                out.push_back(path + ": unexpected property \"" + key + "\"");
            }
        }
    }

    if (value.is_array()) {
        if (schema.contains("minItems") && value.size() < schema.at("minItems").get<std::size_t>())
            out.push_back(path + ": " + std::to_string(value.size()) + " items, need at least " +
                          schema.at("minItems").dump());
        if (schema.contains("maxItems") && value.size() > schema.at("maxItems").get<std::size_t>())
            out.push_back(path + ": " + std::to_string(value.size()) + " items, allowed at most " +
                          schema.at("maxItems").dump());
        if (schema.contains("items")) {
            std::size_t i = 0;
            for (const auto& item : value)
                check_schema_at(schema.at("items"), item, path + "/" + std::to_string(i++), out);
        }
    }
}

}  // namespace detail

// All violations of `value` against `schema`; empty means valid.
inline std::vector<std::string> schema_violations(const Json& schema, const Json& value) {
    std::vector<std::string> out;
    detail::check_schema_at(schema, value, "$", out);
    return out;
}

inline bool schema_valid(const Json& schema, const Json& value) {
    return schema_violations(schema, value).empty();
}

}  // namespace silofactor
