#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tokinsight/attribution.hpp"
#include "tokinsight/image.hpp"

namespace tokinsight {

struct LabeledTrace {
    std::string image_id;
    AttributionTrace trace;
};

struct TraceRecord {
    std::string image_id;
    std::size_t tokens_discarded = 0;
    float max_single_drop = 0.0f;  // 0 for a trace without steps
    bool flipped = false;
    TraceStatus status = TraceStatus::Exhausted;
    float initial_confidence = 0.0f;
};

/// Distribution summary. Median and quartiles use linear interpolation
/// between order statistics at position q * (count - 1).
struct Summary {
    std::size_t count = 0;
    double mean = 0.0;
    double median = 0.0;
    double q1 = 0.0;
    double q3 = 0.0;
    double min = 0.0;
    double max = 0.0;
};

/// Mean target-class confidence over the traces that still have a recorded
/// value at `iteration` (iteration 0 is the unmodified input).
struct CurvePoint {
    std::size_t iteration = 0;
    std::size_t active = 0;
    double mean_confidence = 0.0;
};

struct CohortStats {
    std::vector<TraceRecord> records;  // sorted by image_id
    Summary tokens_discarded;
    Summary max_single_drop;
    std::vector<CurvePoint> curve;
    std::optional<double> mean_discarded_flipped;  // marker; unset when nothing flipped
};

Summary summarize(std::vector<double> values);

/// Throws EmptyInput for an empty cohort. Result does not depend on input order.
CohortStats aggregate(std::span<const LabeledTrace> traces);

// CSV output follows RFC 4180 (CRLF line ends, quoted fields where needed);
// numbers carry 6 significant digits.
std::string traces_to_csv(std::span<const LabeledTrace> traces);
std::string stats_to_csv(const CohortStats& stats);
std::string curve_to_csv(const CohortStats& stats);
std::string stats_to_json(const CohortStats& stats);

void export_csv(std::span<const LabeledTrace> traces, const std::filesystem::path& path);
void export_csv(const CohortStats& stats, const std::filesystem::path& path);

inline constexpr Rgb kOverlayTint = {1.0f, 0.0f, 0.0f};
inline constexpr float kOverlayAlphaFirst = 0.7f;
inline constexpr float kOverlayAlphaLast = 0.2f;

/// Tint alpha for rank r (1-based) of k ranked tokens: 0.7 for rank 1,
/// falling linearly to 0.2 at rank k.
float overlay_alpha(std::size_t rank, std::size_t ranked);

/// Blends each ranked patch towards red with overlay_alpha() and draws a
/// 1-pixel opaque red border along its edge. Unranked patches are copied
/// unchanged.
InputImage render_overlay(const InputImage& img, const ImportanceMap& map);

}  // namespace tokinsight
