#include "tokinsight/trace_io.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "tokinsight/error.hpp"

namespace tokinsight {

namespace {

using ordered_json = nlohmann::ordered_json;

// The double nearest the float's shortest decimal: 0.6f prints as 0.6.
double json_number(float value) {
    return std::strtod(format_float(value).c_str(), nullptr);
}

[[noreturn]] void parse_error(const std::string& what) {
    throw Error(ErrorCode::Parse, what);
}

const ordered_json& field(const ordered_json& obj, const char* name, const char* context) {
    if (!obj.is_object() || !obj.contains(name)) parse_error(std::string(context) + ": missing field \"" + name + "\"");
    return obj[name];
}

std::size_t as_index(const ordered_json& v, const char* name) {
    if (!v.is_number_unsigned()) parse_error(std::string("field \"") + name + "\" must be a non-negative integer");
    return v.get<std::size_t>();
}

// Inverse of json_number().
float as_float(const ordered_json& v, const char* name) {
    if (!v.is_number()) parse_error(std::string("field \"") + name + "\" must be a number");
    char buf[64];
    const auto written = std::to_chars(buf, buf + sizeof buf, v.get<double>());
    float out = 0.0f;
    const auto read = std::from_chars(buf, written.ptr, out);
    if (read.ec != std::errc()) parse_error(std::string("field \"") + name + "\" is out of float range");
    return out;
}

ordered_json parse_document(const std::string& text) {
    try {
        return ordered_json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        parse_error(std::string("invalid JSON: ") + e.what());
    }
}

void check_schema(const ordered_json& doc, const char* context) {
    const auto& schema = field(doc, "schema", context);
    if (!schema.is_number_integer() || schema.get<int>() != kTraceSchemaVersion) {
        parse_error(std::string(context) + ": unsupported schema version");
    }
}

}  // namespace

std::string format_float(float value) {
    if (!std::isfinite(value)) throw Error(ErrorCode::InvalidArgument, "cannot serialize a non-finite value");
    char buf[32];
    const auto result = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, result.ptr);
}

std::string trace_to_json(const AttributionTrace& trace) {
    ordered_json doc;
    doc["schema"] = kTraceSchemaVersion;
    doc["target_class"] = trace.target_class;
    doc["initial_confidence"] = json_number(trace.initial_confidence);
    doc["status"] = std::string(to_string(trace.status));
    doc["steps"] = ordered_json::array();
    for (const auto& s : trace.steps) {
        ordered_json step;
        step["i"] = s.iteration;
        step["token"] = s.token;
        step["confidence"] = json_number(s.confidence);
        step["drop"] = json_number(s.drop);
        doc["steps"].push_back(std::move(step));
    }
    return doc.dump(2) + "\n";
}

AttributionTrace trace_from_json(const std::string& text) {
    const ordered_json doc = parse_document(text);
    check_schema(doc, "trace");
    AttributionTrace trace;
    trace.target_class = as_index(field(doc, "target_class", "trace"), "target_class");
    trace.initial_confidence = as_float(field(doc, "initial_confidence", "trace"), "initial_confidence");
    const auto& status = field(doc, "status", "trace");
    if (!status.is_string()) parse_error("field \"status\" must be a string");
    auto parsed = parse_trace_status(status.get<std::string>());
    if (!parsed) parse_error("unknown trace status \"" + status.get<std::string>() + "\"");
    trace.status = *parsed;
    const auto& steps = field(doc, "steps", "trace");
    if (!steps.is_array()) parse_error("field \"steps\" must be an array");
    for (const auto& s : steps) {
        AttributionStep step;
        step.iteration = as_index(field(s, "i", "step"), "i");
        step.token = as_index(field(s, "token", "step"), "token");
        step.confidence = as_float(field(s, "confidence", "step"), "confidence");
        step.drop = as_float(field(s, "drop", "step"), "drop");
        if (step.iteration != trace.steps.size() + 1) parse_error("step iterations must count up from 1");
        trace.steps.push_back(step);
    }
    return trace;
}

AttributionTrace read_trace(const std::filesystem::path& path) {
    try {
        return trace_from_json(read_text_file(path));
    } catch (const Error& e) {
        throw Error(e.code(), path.string() + ": " + e.what());
    }
}

std::string importance_to_json(const ImportanceMap& map) {
    ordered_json doc;
    doc["schema"] = kTraceSchemaVersion;
    doc["grid"] = map.grid;
    doc["tokens"] = ordered_json::array();
    for (std::size_t k = 0; k < map.entries.size(); ++k) {
        const auto& e = map.entries[k];
        ordered_json entry;
        entry["token"] = k;
        entry["rank"] = e.rank ? ordered_json(*e.rank) : ordered_json(nullptr);
        entry["drop"] = json_number(e.drop);
        doc["tokens"].push_back(std::move(entry));
    }
    return doc.dump(2) + "\n";
}

ImportanceMap importance_from_json(const std::string& text) {
    const ordered_json doc = parse_document(text);
    check_schema(doc, "importance map");
    ImportanceMap map;
    map.grid = as_index(field(doc, "grid", "importance map"), "grid");
    const auto& tokens = field(doc, "tokens", "importance map");
    if (!tokens.is_array() || tokens.size() != map.grid * map.grid) {
        parse_error("importance map must list exactly grid*grid tokens");
    }
    map.entries.resize(tokens.size());
    for (const auto& t : tokens) {
        const std::size_t k = as_index(field(t, "token", "token entry"), "token");
        if (k >= map.entries.size()) parse_error("token index out of range");
        const auto& rank = field(t, "rank", "token entry");
        if (!rank.is_null()) map.entries[k].rank = as_index(rank, "rank");
        map.entries[k].drop = as_float(field(t, "drop", "token entry"), "drop");
    }
    return map;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "' for writing");
    file << text;
    if (!file) throw Error(ErrorCode::Io, "failed writing '" + path.string() + "'");
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "'");
    std::ostringstream buf;
    buf << file.rdbuf();
    return buf.str();
}

}  // namespace tokinsight
