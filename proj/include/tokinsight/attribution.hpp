#pragma once

#include <atomic>
#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "tokinsight/image.hpp"
#include "tokinsight/prediction.hpp"
#include "tokinsight/vit.hpp"

namespace tokinsight {

/// A classifier that can be evaluated on any subset of its N input tokens.
/// evaluate() must be deterministic and safe to call concurrently.
class SubsetClassifier {
public:
    virtual ~SubsetClassifier() = default;
    virtual std::size_t token_count() const = 0;
    virtual Prediction evaluate(const TokenSubset& subset) const = 0;
};

/// Binds a ViT to one tokenized image.
class VitSubsetClassifier final : public SubsetClassifier {
public:
    VitSubsetClassifier(const VitModel& model, TokenSequence tokens)
        : model_(model), tokens_(std::move(tokens)) {}

    std::size_t token_count() const override { return model_.config().token_count(); }
    Prediction evaluate(const TokenSubset& subset) const override { return model_.forward_subset(tokens_, subset); }

private:
    const VitModel& model_;
    TokenSequence tokens_;
};

/// Forwards to another classifier and counts evaluate() calls.
class CountingClassifier final : public SubsetClassifier {
public:
    explicit CountingClassifier(const SubsetClassifier& inner) : inner_(inner) {}

    std::size_t token_count() const override { return inner_.token_count(); }
    Prediction evaluate(const TokenSubset& subset) const override {
        evaluations_.fetch_add(1, std::memory_order_relaxed);
        return inner_.evaluate(subset);
    }
    std::size_t evaluations() const noexcept { return evaluations_.load(); }

private:
    const SubsetClassifier& inner_;
    mutable std::atomic<std::size_t> evaluations_{0};
};

/// How candidate evaluations within one greedy iteration are scheduled.
/// Results never depend on these values.
struct EvaluationSchedule {
    unsigned workers = 1;
    std::size_t wave_size = 0;  // candidates in flight per wave; 0 = all at once
};

struct Candidate {
    std::size_t token = 0;
    float confidence = 0.0f;  // target-class probability with `token` removed
    std::size_t top_class = 0;
};

/// One candidate per retained token, in ascending token order.
std::vector<Candidate> evaluate_candidates(const SubsetClassifier& model, const TokenSubset& current,
                                           std::size_t target_class, const EvaluationSchedule& schedule = {});

/// Token with the lowest confidence-if-removed; ties go to the smallest index.
std::size_t greedy_step(std::span<const Candidate> candidates);

enum class TraceStatus { Flipped, Exhausted, MaxItersReached };

std::string_view to_string(TraceStatus status);
std::optional<TraceStatus> parse_trace_status(std::string_view text);

struct AttributionStep {
    std::size_t iteration = 0;  // 1-based
    std::size_t token = 0;
    float confidence = 0.0f;  // target-class probability after this removal
    float drop = 0.0f;        // previous confidence minus `confidence`

    bool operator==(const AttributionStep&) const = default;
};

struct AttributionTrace {
    std::size_t target_class = 0;
    float initial_confidence = 0.0f;
    std::vector<AttributionStep> steps;
    TraceStatus status = TraceStatus::Exhausted;

    bool operator==(const AttributionTrace&) const = default;
};

struct SearchOptions {
    std::optional<std::size_t> target_class;  // nullopt: the full-input top class
    std::optional<std::size_t> max_iters;     // nullopt: N
    EvaluationSchedule schedule;
};

/// Greedy token discarding: repeatedly removes the token whose removal lowers
/// the target-class confidence the most, until the top class changes, no
/// tokens remain, or max_iters steps have been taken.
///
/// Throws InitialMisprediction if an explicit target differs from the full
/// input's top class.
AttributionTrace run_token_insight(const SubsetClassifier& model, const SearchOptions& options = {});

/// Evaluations performed by a k-step search over N tokens: one full-input
/// pass plus sum_{j=0}^{k-1} (N - j) candidate passes.
std::size_t expected_evaluations(std::size_t token_count, std::size_t steps);

struct ImportanceEntry {
    std::optional<std::size_t> rank;  // 1-based
    float drop = 0.0f;

    bool operator==(const ImportanceEntry&) const = default;
};

/// Per-token ranks on a square patch grid, row-major.
struct ImportanceMap {
    std::size_t grid = 0;  // tokens per side
    std::vector<ImportanceEntry> entries;

    std::size_t ranked_count() const;
    bool operator==(const ImportanceMap&) const = default;
};

ImportanceMap trace_to_importance(const AttributionTrace& trace, std::size_t grid);

/// A classifier over full images at model resolution.
class ImageClassifier {
public:
    virtual ~ImageClassifier() = default;
    virtual std::size_t patch_size() const = 0;
    virtual Prediction evaluate(const InputImage& img) const = 0;
};

class VitImageClassifier final : public ImageClassifier {
public:
    explicit VitImageClassifier(const VitModel& model, Preprocess pre = {}) : model_(model), pre_(pre) {}

    std::size_t patch_size() const override { return model_.config().patch_size; }
    Prediction evaluate(const InputImage& img) const override {
        return model_.forward_subset(model_.tokenize(img, pre_), TokenSubset::full(model_.config().token_count()));
    }

private:
    const VitModel& model_;
    Preprocess pre_;
};

enum class OcclusionFill { Black, Mean };

std::optional<OcclusionFill> parse_occlusion_fill(std::string_view text);

/// Paints the pixels of patch `token` with `fill`.
void occlude_patch(InputImage& img, std::size_t token, std::size_t patch_size, const Rgb& fill);

/// Occlusion baseline: each patch in turn is painted with the fill colour
/// (black, or the image's per-channel mean) and re-evaluated with the token
/// count unchanged. drop = full confidence - occluded confidence for the
/// full-input top class; every token is ranked by descending drop, ties by
/// index.
ImportanceMap run_occlusion(const ImageClassifier& model, const InputImage& img, OcclusionFill fill,
                            unsigned workers = 1);

}  // namespace tokinsight
