/*
 * tokinsight C API.
 *
 * Every object is an opaque handle created by a ti_*_create/load/open call
 * and released with the matching ti_*_free. Functions that can fail return a
 * ti_status; on failure ti_last_error() describes the problem for the
 * calling thread. Strings returned through char** are owned by the caller
 * and released with ti_string_free.
 *
 * Handles are immutable once created (except ti_cohort, which grows through
 * ti_cohort_add), so a model may be shared by any number of threads.
 */
#ifndef TOKINSIGHT_H
#define TOKINSIGHT_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define TI_API __declspec(dllexport)
#else
#define TI_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ti_status {
    TI_OK = 0,
    TI_ERR_INVALID_ARGUMENT = 1,
    TI_ERR_SHAPE_MISMATCH = 2,
    TI_ERR_IO = 3,
    TI_ERR_BAD_MAGIC = 4,
    TI_ERR_TRUNCATED = 5,
    TI_ERR_MALFORMED_HEADER = 6,
    TI_ERR_OVERLAPPING_RANGES = 7,
    TI_ERR_DUPLICATE_NAME = 8,
    TI_ERR_MISSING_KEY = 9,
    TI_ERR_SCHEMA_SHAPE = 10,
    TI_ERR_UNSUPPORTED_FORMAT = 11,
    TI_ERR_DECODE_FAILURE = 12,
    TI_ERR_INITIAL_MISPREDICTION = 13,
    TI_ERR_EMPTY_INPUT = 14,
    TI_ERR_PARSE = 15,
    TI_ERR_INTERNAL = 100
} ti_status;

typedef enum ti_trace_status {
    TI_TRACE_FLIPPED = 0,
    TI_TRACE_EXHAUSTED = 1,
    TI_TRACE_MAX_ITERS_REACHED = 2
} ti_trace_status;

typedef enum ti_fill { TI_FILL_BLACK = 0, TI_FILL_MEAN = 1 } ti_fill;

typedef struct ti_archive ti_archive;
typedef struct ti_model ti_model;
typedef struct ti_image ti_image;
typedef struct ti_trace ti_trace;
typedef struct ti_importance ti_importance;
typedef struct ti_cohort ti_cohort;

typedef struct ti_config {
    size_t image_size;
    size_t patch_size;
    size_t dim;
    size_t depth;
    size_t heads;
    size_t num_classes; /* 0 when loading a model: take it from head.bias */
} ti_config;

typedef struct ti_preprocess {
    float mean[3];
    float std[3];
} ti_preprocess;

typedef struct ti_archive_entry_info {
    const char* name;    /* valid while the archive is alive */
    const size_t* shape; /* valid while the archive is alive */
    size_t rank;
    uint64_t offset;
    uint64_t nbytes;
} ti_archive_entry_info;

typedef struct ti_prediction {
    size_t top_class;
    float confidence;
    size_t num_classes;
} ti_prediction;

typedef struct ti_explain_options {
    int64_t target_class; /* -1: the model's own top class */
    int64_t max_iters;    /* -1: the token count */
    unsigned workers;     /* candidate-evaluation threads, >= 1 */
    size_t wave_size;     /* candidates per wave, 0: all at once */
} ti_explain_options;

typedef struct ti_step {
    size_t iteration;
    size_t token;
    float confidence;
    float drop;
} ti_step;

typedef struct ti_summary {
    size_t count;
    double mean;
    double median;
    double q1;
    double q3;
    double min;
    double max;
} ti_summary;

/* errors */
TI_API const char* ti_last_error(void);
TI_API const char* ti_status_name(ti_status status);
TI_API void ti_string_free(char* text);

/* configuration */
TI_API ti_status ti_config_preset(const char* name, ti_config* out);
TI_API ti_status ti_config_validate(const ti_config* config);
TI_API void ti_preprocess_default(ti_preprocess* out);
TI_API void ti_explain_options_default(ti_explain_options* out);

/* tensor archives */
TI_API ti_status ti_archive_open(const char* path, ti_archive** out);
TI_API size_t ti_archive_size(const ti_archive* archive);
TI_API ti_status ti_archive_entry(const ti_archive* archive, size_t index, ti_archive_entry_info* out);
TI_API void ti_archive_free(ti_archive* archive);

/* models */
TI_API ti_status ti_model_load(const char* path, const ti_config* config, ti_model** out);
TI_API ti_status ti_model_config(const ti_model* model, ti_config* out);
TI_API void ti_model_free(ti_model* model);

/* images: RGB, row-major HWC floats in [0, 1] */
TI_API ti_status ti_image_load(const char* path, ti_image** out);
TI_API ti_status ti_image_create(size_t width, size_t height, const float* rgb, ti_image** out);
TI_API size_t ti_image_width(const ti_image* image);
TI_API size_t ti_image_height(const ti_image* image);
TI_API const float* ti_image_pixels(const ti_image* image);
TI_API ti_status ti_image_resize(const ti_image* image, size_t width, size_t height, ti_image** out);
TI_API ti_status ti_image_write(const ti_image* image, const char* path); /* .png -> PNG, else PPM */
TI_API void ti_image_free(ti_image* image);

/* inference; the image is resized to the model resolution first.
 * probs may be NULL; otherwise it receives min(capacity, num_classes) values. */
TI_API ti_status ti_predict(const ti_model* model, const ti_image* image, const ti_preprocess* pre,
                            ti_prediction* out, float* probs, size_t capacity);

/* greedy token discarding */
TI_API ti_status ti_explain(const ti_model* model, const ti_image* image, const ti_preprocess* pre,
                            const ti_explain_options* options, ti_trace** out);
TI_API size_t ti_trace_target_class(const ti_trace* trace);
TI_API float ti_trace_initial_confidence(const ti_trace* trace);
TI_API ti_trace_status ti_trace_get_status(const ti_trace* trace);
TI_API size_t ti_trace_step_count(const ti_trace* trace);
TI_API ti_status ti_trace_step(const ti_trace* trace, size_t index, ti_step* out);
TI_API ti_status ti_trace_to_json(const ti_trace* trace, char** out);
TI_API ti_status ti_trace_from_json(const char* json, ti_trace** out);
TI_API ti_status ti_trace_read(const char* path, ti_trace** out);
TI_API ti_status ti_trace_write(const ti_trace* trace, const char* path);
TI_API void ti_trace_free(ti_trace* trace);

/* importance maps and overlays */
TI_API ti_status ti_trace_importance(const ti_trace* trace, size_t grid, ti_importance** out);
TI_API ti_status ti_occlude(const ti_model* model, const ti_image* image, const ti_preprocess* pre, ti_fill fill,
                            unsigned workers, ti_importance** out);
TI_API size_t ti_importance_grid(const ti_importance* map);
/* rank is 0 for tokens without a rank */
TI_API ti_status ti_importance_entry(const ti_importance* map, size_t token, size_t* rank, float* drop);
TI_API ti_status ti_importance_to_json(const ti_importance* map, char** out);
TI_API ti_status ti_render_overlay(const ti_image* image, const ti_importance* map, ti_image** out);
TI_API void ti_importance_free(ti_importance* map);

/* cohort statistics */
TI_API ti_status ti_cohort_create(ti_cohort** out);
TI_API ti_status ti_cohort_add(ti_cohort* cohort, const char* image_id, const ti_trace* trace);
TI_API size_t ti_cohort_size(const ti_cohort* cohort);
TI_API ti_status ti_cohort_summary(const ti_cohort* cohort, ti_summary* tokens_discarded,
                                   ti_summary* max_single_drop);
TI_API ti_status ti_cohort_stats_json(const ti_cohort* cohort, char** out);
/* writes traces.csv, stats.csv, curve.csv and stats.json into out_dir */
TI_API ti_status ti_cohort_write(const ti_cohort* cohort, const char* out_dir);
TI_API void ti_cohort_free(ti_cohort* cohort);

#ifdef __cplusplus
}
#endif

#endif /* TOKINSIGHT_H */
