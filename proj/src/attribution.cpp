#include "tokinsight/attribution.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "tokinsight/error.hpp"
#include "tokinsight/parallel.hpp"

namespace tokinsight {

std::vector<Candidate> evaluate_candidates(const SubsetClassifier& model, const TokenSubset& current,
                                           std::size_t target_class, const EvaluationSchedule& schedule) {
    if (current.empty()) throw Error(ErrorCode::EmptyInput, "no retained tokens left to evaluate");
    const auto retained = current.retained();
    std::vector<Candidate> out(retained.size());
    const std::size_t wave = schedule.wave_size == 0 ? retained.size() : schedule.wave_size;
    for (std::size_t begin = 0; begin < retained.size(); begin += wave) {
        const std::size_t count = std::min(wave, retained.size() - begin);
        parallel_for(count, schedule.workers, [&](std::size_t i) {
            const std::size_t token = retained[begin + i];
            const Prediction p = model.evaluate(current.without(token));
            if (target_class >= p.num_classes()) {
                throw Error(ErrorCode::InvalidArgument, "target class " + std::to_string(target_class) +
                                                            " is out of range for " +
                                                            std::to_string(p.num_classes()) + " classes");
            }
            out[begin + i] = Candidate{token, p.prob(target_class), p.top_class};
        });
    }
    return out;
}

std::size_t greedy_step(std::span<const Candidate> candidates) {
    if (candidates.empty()) throw Error(ErrorCode::EmptyInput, "greedy_step needs at least one candidate");
    const Candidate* best = &candidates.front();
    for (const auto& c : candidates) {
        if (c.confidence < best->confidence || (c.confidence == best->confidence && c.token < best->token)) best = &c;
    }
    return best->token;
}

std::string_view to_string(TraceStatus status) {
    switch (status) {
        case TraceStatus::Flipped: return "flipped";
        case TraceStatus::Exhausted: return "exhausted";
        case TraceStatus::MaxItersReached: return "max_iters_reached";
    }
    return "unknown";
}

std::optional<TraceStatus> parse_trace_status(std::string_view text) {
    if (text == "flipped") return TraceStatus::Flipped;
    if (text == "exhausted") return TraceStatus::Exhausted;
    if (text == "max_iters_reached") return TraceStatus::MaxItersReached;
    return std::nullopt;
}

AttributionTrace run_token_insight(const SubsetClassifier& model, const SearchOptions& options) {
    const std::size_t n = model.token_count();
    TokenSubset current = TokenSubset::full(n);
    const Prediction initial = model.evaluate(current);

    AttributionTrace trace;
    trace.target_class = options.target_class.value_or(initial.top_class);
    if (trace.target_class >= initial.num_classes()) {
        throw Error(ErrorCode::InvalidArgument, "target class " + std::to_string(trace.target_class) +
                                                    " is out of range for " + std::to_string(initial.num_classes()) +
                                                    " classes");
    }
    if (initial.top_class != trace.target_class) {
        throw Error(ErrorCode::InitialMisprediction,
                    "the full input is predicted as class " + std::to_string(initial.top_class) + ", not the target " +
                        std::to_string(trace.target_class));
    }
    trace.initial_confidence = initial.prob(trace.target_class);

    const std::size_t max_iters = options.max_iters.value_or(n);
    float previous = trace.initial_confidence;
    while (true) {
        if (current.empty()) {
            trace.status = TraceStatus::Exhausted;
            break;
        }
        if (trace.steps.size() >= max_iters) {
            trace.status = TraceStatus::MaxItersReached;
            break;
        }
        const auto candidates = evaluate_candidates(model, current, trace.target_class, options.schedule);
        const std::size_t token = greedy_step(candidates);
        const auto& chosen = *std::find_if(candidates.begin(), candidates.end(),
                                           [token](const Candidate& c) { return c.token == token; });
        current = current.without(token);
        trace.steps.push_back({trace.steps.size() + 1, token, chosen.confidence, previous - chosen.confidence});
        previous = chosen.confidence;
        // the candidate pass already evaluated exactly this subset
        if (chosen.top_class != trace.target_class) {
            trace.status = TraceStatus::Flipped;
            break;
        }
    }
    return trace;
}

std::size_t expected_evaluations(std::size_t token_count, std::size_t steps) {
    std::size_t total = 1;
    for (std::size_t j = 0; j < steps; ++j) total += token_count - j;
    return total;
}

std::size_t ImportanceMap::ranked_count() const {
    return static_cast<std::size_t>(
        std::count_if(entries.begin(), entries.end(), [](const ImportanceEntry& e) { return e.rank.has_value(); }));
}

ImportanceMap trace_to_importance(const AttributionTrace& trace, std::size_t grid) {
    ImportanceMap map{grid, std::vector<ImportanceEntry>(grid * grid)};
    for (std::size_t r = 0; r < trace.steps.size(); ++r) {
        const auto& step = trace.steps[r];
        if (step.token >= map.entries.size()) {
            throw Error(ErrorCode::InvalidArgument, "trace token " + std::to_string(step.token) +
                                                        " lies outside a " + std::to_string(grid) + "x" +
                                                        std::to_string(grid) + " grid");
        }
        if (map.entries[step.token].rank) {
            throw Error(ErrorCode::InvalidArgument, "trace removes token " + std::to_string(step.token) + " twice");
        }
        map.entries[step.token] = {r + 1, step.drop};
    }
    return map;
}

std::optional<OcclusionFill> parse_occlusion_fill(std::string_view text) {
    if (text == "black") return OcclusionFill::Black;
    if (text == "mean") return OcclusionFill::Mean;
    return std::nullopt;
}

void occlude_patch(InputImage& img, std::size_t token, std::size_t patch_size, const Rgb& fill) {
    const std::size_t grid = img.width / patch_size;
    const std::size_t x0 = (token % grid) * patch_size, y0 = (token / grid) * patch_size;
    for (std::size_t y = y0; y < y0 + patch_size; ++y)
        for (std::size_t x = x0; x < x0 + patch_size; ++x)
            for (std::size_t c = 0; c < 3; ++c) img.at(x, y, c) = fill[c];
}

ImportanceMap run_occlusion(const ImageClassifier& model, const InputImage& img, OcclusionFill fill,
                            unsigned workers) {
    const std::size_t p = model.patch_size();
    if (p == 0 || img.width != img.height || img.width % p != 0) {
        throw Error(ErrorCode::ShapeMismatch, "occlusion needs a square image divisible into " + std::to_string(p) +
                                                  "-pixel patches, got " + std::to_string(img.width) + "x" +
                                                  std::to_string(img.height));
    }
    const std::size_t grid = img.width / p;
    const std::size_t n = grid * grid;
    const Rgb colour = fill == OcclusionFill::Black ? Rgb{0.0f, 0.0f, 0.0f} : channel_mean(img);

    const Prediction full = model.evaluate(img);
    const std::size_t c = full.top_class;
    std::vector<float> drops(n);
    parallel_for(n, workers, [&](std::size_t token) {
        InputImage occluded = img;
        occlude_patch(occluded, token, p, colour);
        drops[token] = full.prob(c) - model.evaluate(occluded).prob(c);
    });

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return drops[a] > drops[b]; });
    ImportanceMap map{grid, std::vector<ImportanceEntry>(n)};
    for (std::size_t r = 0; r < n; ++r) map.entries[order[r]] = {r + 1, drops[order[r]]};
    return map;
}

}  // namespace tokinsight
