#pragma once

#include <filesystem>
#include <string>

#include "tokinsight/attribution.hpp"

namespace tokinsight {

inline constexpr int kTraceSchemaVersion = 1;

// Trace JSON, schema 1:
//   {"schema":1,"target_class":c,"initial_confidence":x,"status":"flipped",
//    "steps":[{"i":1,"token":t,"confidence":y,"drop":d},...]}
// Floats are written in their shortest round-trip form, so
// parse(serialize(trace)) == trace bit for bit.

std::string trace_to_json(const AttributionTrace& trace);
AttributionTrace trace_from_json(const std::string& text);
AttributionTrace read_trace(const std::filesystem::path& path);

//   {"schema":1,"grid":g,"tokens":[{"token":k,"rank":r|null,"drop":d},...]}
std::string importance_to_json(const ImportanceMap& map);
ImportanceMap importance_from_json(const std::string& text);

/// Shortest decimal that reads back as exactly `value` when parsed as float.
std::string format_float(float value);

void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace tokinsight
