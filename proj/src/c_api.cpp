#include "tokinsight.h"

#include <cstring>
#include <filesystem>
#include <new>
#include <string>

#include "tokinsight/analysis.hpp"
#include "tokinsight/archive.hpp"
#include "tokinsight/attribution.hpp"
#include "tokinsight/error.hpp"
#include "tokinsight/trace_io.hpp"
#include "tokinsight/vit.hpp"

using namespace tokinsight;

struct ti_archive {
    std::vector<ArchiveEntry> entries;
};

struct ti_model {
    VitModel model;
};

struct ti_image {
    InputImage image;
};

struct ti_trace {
    AttributionTrace trace;
};

struct ti_importance {
    ImportanceMap map;
};

struct ti_cohort {
    std::vector<LabeledTrace> traces;
};

static_assert(static_cast<int>(ErrorCode::InvalidArgument) == TI_ERR_INVALID_ARGUMENT);
static_assert(static_cast<int>(ErrorCode::InitialMisprediction) == TI_ERR_INITIAL_MISPREDICTION);
static_assert(static_cast<int>(ErrorCode::Parse) == TI_ERR_PARSE);

namespace {

thread_local std::string g_last_error;

ti_status fail(ti_status status, std::string message) {
    g_last_error = std::move(message);
    return status;
}

// Runs body() and converts any exception into a status code.
template <typename Body>
ti_status guarded(Body&& body) {
    try {
        body();
        g_last_error.clear();
        return TI_OK;
    } catch (const Error& e) {
        return fail(static_cast<ti_status>(e.code()), e.what());
    } catch (const std::bad_alloc&) {
        return fail(TI_ERR_INTERNAL, "out of memory");
    } catch (const std::exception& e) {
        return fail(TI_ERR_INTERNAL, e.what());
    }
}

void require(const void* ptr, const char* what) {
    if (!ptr) throw Error(ErrorCode::InvalidArgument, std::string(what) + " must not be NULL");
}

char* copy_string(const std::string& text) {
    char* out = static_cast<char*>(std::malloc(text.size() + 1));
    if (!out) throw std::bad_alloc();
    std::memcpy(out, text.c_str(), text.size() + 1);
    return out;
}

ViTConfig from_c(const ti_config& c) {
    return ViTConfig{c.image_size, c.patch_size, c.dim, c.depth, c.heads, c.num_classes};
}

ti_config to_c(const ViTConfig& c) {
    return ti_config{c.image_size, c.patch_size, c.dim, c.depth, c.heads, c.num_classes};
}

Preprocess from_c(const ti_preprocess* pre) {
    Preprocess p;
    if (pre) {
        for (int c = 0; c < 3; ++c) {
            p.mean[c] = pre->mean[c];
            p.std[c] = pre->std[c];
        }
    }
    return p;
}

InputImage at_model_resolution(const VitModel& model, const InputImage& img) {
    const auto size = model.config().image_size;
    return img.width == size && img.height == size ? img : resize_bilinear(img, size, size);
}

}  // namespace

extern "C" {

const char* ti_last_error(void) {
    return g_last_error.c_str();
}

const char* ti_status_name(ti_status status) {
    if (status == TI_OK) return "ok";
    if (status == TI_ERR_INTERNAL) return "internal error";
    return error_code_name(static_cast<ErrorCode>(status));
}

void ti_string_free(char* text) {
    std::free(text);
}

ti_status ti_config_preset(const char* name, ti_config* out) {
    return guarded([&] {
        require(name, "name");
        require(out, "out");
        auto preset = config_preset(name);
        if (!preset) throw Error(ErrorCode::InvalidArgument, std::string("unknown config preset '") + name + "'");
        *out = to_c(*preset);
    });
}

ti_status ti_config_validate(const ti_config* config) {
    return guarded([&] {
        require(config, "config");
        from_c(*config).validate();
    });
}

void ti_preprocess_default(ti_preprocess* out) {
    if (!out) return;
    for (int c = 0; c < 3; ++c) {
        out->mean[c] = kImageNetMean[c];
        out->std[c] = kImageNetStd[c];
    }
}

void ti_explain_options_default(ti_explain_options* out) {
    if (!out) return;
    *out = ti_explain_options{-1, -1, 1, 0};
}

ti_status ti_archive_open(const char* path, ti_archive** out) {
    return guarded([&] {
        require(path, "path");
        require(out, "out");
        *out = new ti_archive{read_archive_index(path)};
    });
}

size_t ti_archive_size(const ti_archive* archive) {
    return archive ? archive->entries.size() : 0;
}

ti_status ti_archive_entry(const ti_archive* archive, size_t index, ti_archive_entry_info* out) {
    return guarded([&] {
        require(archive, "archive");
        require(out, "out");
        if (index >= archive->entries.size()) throw Error(ErrorCode::InvalidArgument, "archive entry index out of range");
        const auto& e = archive->entries[index];
        *out = ti_archive_entry_info{e.name.c_str(), e.shape.data(), e.shape.size(), e.offset, e.nbytes};
    });
}

void ti_archive_free(ti_archive* archive) {
    delete archive;
}

ti_status ti_model_load(const char* path, const ti_config* config, ti_model** out) {
    return guarded([&] {
        require(path, "path");
        require(config, "config");
        require(out, "out");
        if (!std::filesystem::exists(path)) {
            throw Error(ErrorCode::Io, std::string("weights file '") + path + "' does not exist");
        }
        ViTConfig c = from_c(*config);
        if (c.num_classes == 0) {
            ViTConfig probe = c;
            probe.num_classes = 1;
            probe.validate();
        } else {
            c.validate();
        }
        *out = new ti_model{load_model(path, c)};
    });
}

ti_status ti_model_config(const ti_model* model, ti_config* out) {
    return guarded([&] {
        require(model, "model");
        require(out, "out");
        *out = to_c(model->model.config());
    });
}

void ti_model_free(ti_model* model) {
    delete model;
}

ti_status ti_image_load(const char* path, ti_image** out) {
    return guarded([&] {
        require(path, "path");
        require(out, "out");
        *out = new ti_image{load_image(path)};
    });
}

ti_status ti_image_create(size_t width, size_t height, const float* rgb, ti_image** out) {
    return guarded([&] {
        require(rgb, "rgb");
        require(out, "out");
        if (width == 0 || height == 0) throw Error(ErrorCode::InvalidArgument, "image dimensions must be positive");
        InputImage img(width, height);
        std::copy(rgb, rgb + img.pixels.size(), img.pixels.begin());
        for (float v : img.pixels) {
            if (!(v >= 0.0f && v <= 1.0f)) throw Error(ErrorCode::InvalidArgument, "pixel values must lie in [0, 1]");
        }
        *out = new ti_image{std::move(img)};
    });
}

size_t ti_image_width(const ti_image* image) {
    return image ? image->image.width : 0;
}

size_t ti_image_height(const ti_image* image) {
    return image ? image->image.height : 0;
}

const float* ti_image_pixels(const ti_image* image) {
    return image ? image->image.pixels.data() : nullptr;
}

ti_status ti_image_resize(const ti_image* image, size_t width, size_t height, ti_image** out) {
    return guarded([&] {
        require(image, "image");
        require(out, "out");
        *out = new ti_image{resize_bilinear(image->image, width, height)};
    });
}

ti_status ti_image_write(const ti_image* image, const char* path) {
    return guarded([&] {
        require(image, "image");
        require(path, "path");
        write_image(image->image, path);
    });
}

void ti_image_free(ti_image* image) {
    delete image;
}

ti_status ti_predict(const ti_model* model, const ti_image* image, const ti_preprocess* pre, ti_prediction* out,
                     float* probs, size_t capacity) {
    return guarded([&] {
        require(model, "model");
        require(image, "image");
        require(out, "out");
        const Prediction p = model->model.predict(image->image, from_c(pre));
        *out = ti_prediction{p.top_class, p.confidence, p.num_classes()};
        if (probs) {
            for (size_t i = 0; i < std::min(capacity, p.num_classes()); ++i) probs[i] = p.probs[i];
        }
    });
}

ti_status ti_explain(const ti_model* model, const ti_image* image, const ti_preprocess* pre,
                     const ti_explain_options* options, ti_trace** out) {
    return guarded([&] {
        require(model, "model");
        require(image, "image");
        require(out, "out");
        ti_explain_options opts;
        ti_explain_options_default(&opts);
        if (options) opts = *options;
        if (opts.workers == 0) throw Error(ErrorCode::InvalidArgument, "workers must be at least 1");

        SearchOptions search;
        if (opts.target_class >= 0) search.target_class = static_cast<std::size_t>(opts.target_class);
        if (opts.max_iters >= 0) search.max_iters = static_cast<std::size_t>(opts.max_iters);
        search.schedule = EvaluationSchedule{opts.workers, opts.wave_size};

        const VitModel& vit = model->model;
        VitSubsetClassifier classifier(vit, vit.tokenize(at_model_resolution(vit, image->image), from_c(pre)));
        *out = new ti_trace{run_token_insight(classifier, search)};
    });
}

size_t ti_trace_target_class(const ti_trace* trace) {
    return trace ? trace->trace.target_class : 0;
}

float ti_trace_initial_confidence(const ti_trace* trace) {
    return trace ? trace->trace.initial_confidence : 0.0f;
}

ti_trace_status ti_trace_get_status(const ti_trace* trace) {
    if (!trace) return TI_TRACE_EXHAUSTED;
    switch (trace->trace.status) {
        case TraceStatus::Flipped: return TI_TRACE_FLIPPED;
        case TraceStatus::Exhausted: return TI_TRACE_EXHAUSTED;
        case TraceStatus::MaxItersReached: return TI_TRACE_MAX_ITERS_REACHED;
    }
    return TI_TRACE_EXHAUSTED;
}

size_t ti_trace_step_count(const ti_trace* trace) {
    return trace ? trace->trace.steps.size() : 0;
}

ti_status ti_trace_step(const ti_trace* trace, size_t index, ti_step* out) {
    return guarded([&] {
        require(trace, "trace");
        require(out, "out");
        if (index >= trace->trace.steps.size()) throw Error(ErrorCode::InvalidArgument, "step index out of range");
        const auto& s = trace->trace.steps[index];
        *out = ti_step{s.iteration, s.token, s.confidence, s.drop};
    });
}

ti_status ti_trace_to_json(const ti_trace* trace, char** out) {
    return guarded([&] {
        require(trace, "trace");
        require(out, "out");
        *out = copy_string(trace_to_json(trace->trace));
    });
}

ti_status ti_trace_from_json(const char* json, ti_trace** out) {
    return guarded([&] {
        require(json, "json");
        require(out, "out");
        *out = new ti_trace{trace_from_json(json)};
    });
}

ti_status ti_trace_read(const char* path, ti_trace** out) {
    return guarded([&] {
        require(path, "path");
        require(out, "out");
        *out = new ti_trace{read_trace(path)};
    });
}

ti_status ti_trace_write(const ti_trace* trace, const char* path) {
    return guarded([&] {
        require(trace, "trace");
        require(path, "path");
        write_text_file(path, trace_to_json(trace->trace));
    });
}

void ti_trace_free(ti_trace* trace) {
    delete trace;
}

ti_status ti_trace_importance(const ti_trace* trace, size_t grid, ti_importance** out) {
    return guarded([&] {
        require(trace, "trace");
        require(out, "out");
        *out = new ti_importance{trace_to_importance(trace->trace, grid)};
    });
}

ti_status ti_occlude(const ti_model* model, const ti_image* image, const ti_preprocess* pre, ti_fill fill,
                     unsigned workers, ti_importance** out) {
    return guarded([&] {
        require(model, "model");
        require(image, "image");
        require(out, "out");
        if (fill != TI_FILL_BLACK && fill != TI_FILL_MEAN) throw Error(ErrorCode::InvalidArgument, "unknown fill");
        const VitModel& vit = model->model;
        VitImageClassifier classifier(vit, from_c(pre));
        const auto mode = fill == TI_FILL_BLACK ? OcclusionFill::Black : OcclusionFill::Mean;
        *out = new ti_importance{
            run_occlusion(classifier, at_model_resolution(vit, image->image), mode, std::max(1u, workers))};
    });
}

size_t ti_importance_grid(const ti_importance* map) {
    return map ? map->map.grid : 0;
}

ti_status ti_importance_entry(const ti_importance* map, size_t token, size_t* rank, float* drop) {
    return guarded([&] {
        require(map, "map");
        if (token >= map->map.entries.size()) throw Error(ErrorCode::InvalidArgument, "token index out of range");
        const auto& e = map->map.entries[token];
        if (rank) *rank = e.rank.value_or(0);
        if (drop) *drop = e.drop;
    });
}

ti_status ti_importance_to_json(const ti_importance* map, char** out) {
    return guarded([&] {
        require(map, "map");
        require(out, "out");
        *out = copy_string(importance_to_json(map->map));
    });
}

ti_status ti_render_overlay(const ti_image* image, const ti_importance* map, ti_image** out) {
    return guarded([&] {
        require(image, "image");
        require(map, "map");
        require(out, "out");
        *out = new ti_image{render_overlay(image->image, map->map)};
    });
}

void ti_importance_free(ti_importance* map) {
    delete map;
}

ti_status ti_cohort_create(ti_cohort** out) {
    return guarded([&] {
        require(out, "out");
        *out = new ti_cohort{};
    });
}

ti_status ti_cohort_add(ti_cohort* cohort, const char* image_id, const ti_trace* trace) {
    return guarded([&] {
        require(cohort, "cohort");
        require(image_id, "image_id");
        require(trace, "trace");
        cohort->traces.push_back({image_id, trace->trace});
    });
}

size_t ti_cohort_size(const ti_cohort* cohort) {
    return cohort ? cohort->traces.size() : 0;
}

ti_status ti_cohort_summary(const ti_cohort* cohort, ti_summary* tokens_discarded, ti_summary* max_single_drop) {
    return guarded([&] {
        require(cohort, "cohort");
        const CohortStats stats = aggregate(cohort->traces);
        auto convert = [](const Summary& s) { return ti_summary{s.count, s.mean, s.median, s.q1, s.q3, s.min, s.max}; };
        if (tokens_discarded) *tokens_discarded = convert(stats.tokens_discarded);
        if (max_single_drop) *max_single_drop = convert(stats.max_single_drop);
    });
}

ti_status ti_cohort_stats_json(const ti_cohort* cohort, char** out) {
    return guarded([&] {
        require(cohort, "cohort");
        require(out, "out");
        *out = copy_string(stats_to_json(aggregate(cohort->traces)));
    });
}

ti_status ti_cohort_write(const ti_cohort* cohort, const char* out_dir) {
    return guarded([&] {
        require(cohort, "cohort");
        require(out_dir, "out_dir");
        const CohortStats stats = aggregate(cohort->traces);
        const std::filesystem::path dir(out_dir);
        std::error_code ec;
        std::filesystem::create_directories(dir, ec);
        if (ec) throw Error(ErrorCode::Io, "cannot create '" + dir.string() + "': " + ec.message());
        export_csv(std::span<const LabeledTrace>(cohort->traces), dir / "traces.csv");
        export_csv(stats, dir / "stats.csv");
        write_text_file(dir / "curve.csv", curve_to_csv(stats));
        write_text_file(dir / "stats.json", stats_to_json(stats));
    });
}

void ti_cohort_free(ti_cohort* cohort) {
    delete cohort;
}

}  // extern "C"
