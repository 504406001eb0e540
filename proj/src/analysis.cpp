#include "tokinsight/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "tokinsight/error.hpp"
#include "tokinsight/trace_io.hpp"

namespace tokinsight {

namespace {

std::string number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::string csv_field(const std::string& text) {
    if (text.find_first_of(",\"\r\n") == std::string::npos) return text;
    std::string out = "\"";
    for (char c : text) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

class CsvWriter {
public:
    template <typename... Fields>
    void row(const Fields&... fields) {
        bool first = true;
        ((out_ << (first ? "" : ",") << fields, first = false), ...);
        out_ << "\r\n";
    }
    void blank() { out_ << "\r\n"; }
    std::string str() const { return out_.str(); }

private:
    std::ostringstream out_;
};

double sorted_sum(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    return std::accumulate(values.begin(), values.end(), 0.0);
}

double quantile(const std::vector<double>& sorted, double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

void summary_row(CsvWriter& csv, const char* metric, const Summary& s) {
    csv.row(metric, s.count, number(s.mean), number(s.median), number(s.q1), number(s.q3), number(s.min),
            number(s.max));
}

nlohmann::ordered_json summary_json(const Summary& s) {
    return {{"count", s.count}, {"mean", s.mean}, {"median", s.median}, {"q1", s.q1},
            {"q3", s.q3},       {"min", s.min},   {"max", s.max}};
}

}  // namespace

Summary summarize(std::vector<double> values) {
    if (values.empty()) throw Error(ErrorCode::EmptyInput, "cannot summarize an empty sample");
    std::sort(values.begin(), values.end());
    Summary s;
    s.count = values.size();
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    s.median = quantile(values, 0.5);
    s.q1 = quantile(values, 0.25);
    s.q3 = quantile(values, 0.75);
    s.min = values.front();
    s.max = values.back();
    return s;
}

CohortStats aggregate(std::span<const LabeledTrace> traces) {
    if (traces.empty()) throw Error(ErrorCode::EmptyInput, "no traces to aggregate");
    CohortStats stats;
    for (const auto& [id, trace] : traces) {
        TraceRecord r;
        r.image_id = id;
        r.tokens_discarded = trace.steps.size();
        if (!trace.steps.empty()) {
            r.max_single_drop = std::max_element(trace.steps.begin(), trace.steps.end(), [](auto& a, auto& b) {
                                    return a.drop < b.drop;
                                })->drop;
        }
        r.flipped = trace.status == TraceStatus::Flipped;
        r.status = trace.status;
        r.initial_confidence = trace.initial_confidence;
        stats.records.push_back(std::move(r));
    }
    std::stable_sort(stats.records.begin(), stats.records.end(),
                     [](const TraceRecord& a, const TraceRecord& b) { return a.image_id < b.image_id; });

    std::vector<double> discarded, drops, flipped_discarded;
    for (const auto& r : stats.records) {
        discarded.push_back(static_cast<double>(r.tokens_discarded));
        drops.push_back(r.max_single_drop);
        if (r.flipped) flipped_discarded.push_back(static_cast<double>(r.tokens_discarded));
    }
    stats.tokens_discarded = summarize(discarded);
    stats.max_single_drop = summarize(drops);
    if (!flipped_discarded.empty()) {
        stats.mean_discarded_flipped = sorted_sum(flipped_discarded) / static_cast<double>(flipped_discarded.size());
    }

    std::size_t longest = 0;
    for (const auto& t : traces) longest = std::max(longest, t.trace.steps.size());
    for (std::size_t i = 0; i <= longest; ++i) {
        std::vector<double> values;
        for (const auto& t : traces) {
            if (i == 0) {
                values.push_back(t.trace.initial_confidence);
            } else if (t.trace.steps.size() >= i) {
                values.push_back(t.trace.steps[i - 1].confidence);
            }
        }
        stats.curve.push_back({i, values.size(), sorted_sum(values) / static_cast<double>(values.size())});
    }
    return stats;
}

std::string traces_to_csv(std::span<const LabeledTrace> traces) {
    CsvWriter csv;
    csv.row("image_id", "iteration", "token", "confidence", "drop");
    for (const auto& [id, trace] : traces) {
        for (const auto& s : trace.steps) {
            csv.row(csv_field(id), s.iteration, s.token, number(s.confidence), number(s.drop));
        }
    }
    return csv.str();
}

std::string stats_to_csv(const CohortStats& stats) {
    CsvWriter csv;
    csv.row("image_id", "tokens_discarded", "max_single_drop", "flipped", "status", "initial_confidence");
    for (const auto& r : stats.records) {
        csv.row(csv_field(r.image_id), r.tokens_discarded, number(r.max_single_drop), r.flipped ? "true" : "false",
                to_string(r.status), number(r.initial_confidence));
    }
    csv.blank();
    csv.row("metric", "count", "mean", "median", "q1", "q3", "min", "max");
    summary_row(csv, "tokens_discarded", stats.tokens_discarded);
    summary_row(csv, "max_single_drop", stats.max_single_drop);
    csv.blank();
    csv.row("marker", "value");
    csv.row("mean_discarded_flipped", stats.mean_discarded_flipped ? number(*stats.mean_discarded_flipped) : "");
    return csv.str();
}

std::string curve_to_csv(const CohortStats& stats) {
    CsvWriter csv;
    csv.row("iteration", "active", "mean_confidence");
    for (const auto& p : stats.curve) csv.row(p.iteration, p.active, number(p.mean_confidence));
    return csv.str();
}

std::string stats_to_json(const CohortStats& stats) {
    using ordered_json = nlohmann::ordered_json;
    ordered_json doc;
    doc["schema"] = kTraceSchemaVersion;
    doc["records"] = ordered_json::array();
    for (const auto& r : stats.records) {
        doc["records"].push_back({{"image_id", r.image_id},
                                  {"tokens_discarded", r.tokens_discarded},
                                  {"max_single_drop", r.max_single_drop},
                                  {"flipped", r.flipped},
                                  {"status", std::string(to_string(r.status))},
                                  {"initial_confidence", r.initial_confidence}});
    }
    doc["tokens_discarded"] = summary_json(stats.tokens_discarded);
    doc["max_single_drop"] = summary_json(stats.max_single_drop);
    doc["curve"] = ordered_json::array();
    for (const auto& p : stats.curve) {
        doc["curve"].push_back(
            {{"iteration", p.iteration}, {"active", p.active}, {"mean_confidence", p.mean_confidence}});
    }
    doc["mean_discarded_flipped"] =
        stats.mean_discarded_flipped ? ordered_json(*stats.mean_discarded_flipped) : ordered_json(nullptr);
    return doc.dump(2) + "\n";
}

void export_csv(std::span<const LabeledTrace> traces, const std::filesystem::path& path) {
    write_text_file(path, traces_to_csv(traces));
}

void export_csv(const CohortStats& stats, const std::filesystem::path& path) {
    write_text_file(path, stats_to_csv(stats));
}

float overlay_alpha(std::size_t rank, std::size_t ranked) {
    if (ranked <= 1) return kOverlayAlphaFirst;
    const float step = (kOverlayAlphaFirst - kOverlayAlphaLast) / static_cast<float>(ranked - 1);
    return kOverlayAlphaFirst - static_cast<float>(rank - 1) * step;
}

InputImage render_overlay(const InputImage& img, const ImportanceMap& map) {
    if (map.grid == 0 || img.width != img.height || img.width % map.grid != 0 ||
        map.entries.size() != map.grid * map.grid) {
        throw Error(ErrorCode::ShapeMismatch, "overlay: a " + std::to_string(map.grid) + "x" +
                                                  std::to_string(map.grid) + " token grid does not tile a " +
                                                  std::to_string(img.width) + "x" + std::to_string(img.height) +
                                                  " image");
    }
    const std::size_t p = img.width / map.grid;
    const std::size_t ranked = map.ranked_count();
    InputImage out = img;
    for (std::size_t k = 0; k < map.entries.size(); ++k) {
        const auto& entry = map.entries[k];
        if (!entry.rank) continue;
        const float alpha = overlay_alpha(*entry.rank, ranked);
        const std::size_t x0 = (k % map.grid) * p, y0 = (k / map.grid) * p;
        for (std::size_t y = y0; y < y0 + p; ++y) {
            for (std::size_t x = x0; x < x0 + p; ++x) {
                const bool border = x == x0 || y == y0 || x == x0 + p - 1 || y == y0 + p - 1;
                for (std::size_t c = 0; c < 3; ++c) {
                    float& v = out.at(x, y, c);
                    v = border ? kOverlayTint[c] : (1.0f - alpha) * v + alpha * kOverlayTint[c];
                }
            }
        }
    }
    return out;
}

}  // namespace tokinsight
