// Command-line front end. Talks to the library only through tokinsight.h.

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "tokinsight.h"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitMisprediction = 2;

template <typename T, void (*Free)(T*)>
struct Deleter {
    void operator()(T* p) const { Free(p); }
};

using ModelPtr = std::unique_ptr<ti_model, Deleter<ti_model, ti_model_free>>;
using ImagePtr = std::unique_ptr<ti_image, Deleter<ti_image, ti_image_free>>;
using TracePtr = std::unique_ptr<ti_trace, Deleter<ti_trace, ti_trace_free>>;
using ImportancePtr = std::unique_ptr<ti_importance, Deleter<ti_importance, ti_importance_free>>;
using ArchivePtr = std::unique_ptr<ti_archive, Deleter<ti_archive, ti_archive_free>>;
using CohortPtr = std::unique_ptr<ti_cohort, Deleter<ti_cohort, ti_cohort_free>>;

struct OwnedString {
    char* text = nullptr;
    ~OwnedString() { ti_string_free(text); }
};

// A failed library call and its status.
struct CallFailed {
    ti_status status;
    std::string message;
};

void check(ti_status status, const std::string& context = {}) {
    if (status == TI_OK) return;
    std::string message = ti_last_error();
    if (!context.empty()) message = context + ": " + message;
    throw CallFailed{status, message};
}

struct ModelFlags {
    std::string weights;
    std::string config = "vitb16";
    std::optional<std::size_t> image_size, patch_size, dim, depth, heads, classes;
    std::string mean, std;
};

struct SearchFlags {
    std::string target = "auto";
    std::optional<std::int64_t> max_iters;
    unsigned workers = 1;
    std::size_t wave = 0;
};

void add_model_flags(CLI::App* cmd, ModelFlags& f) {
    cmd->add_option("--weights", f.weights, "TNSA weight archive")->required();
    cmd->add_option("--config", f.config, "Geometry preset: vitb16 or tiny")->capture_default_str();
    cmd->add_option("--image-size", f.image_size, "Override input resolution");
    cmd->add_option("--patch-size", f.patch_size, "Override patch size");
    cmd->add_option("--dim", f.dim, "Override embedding width");
    cmd->add_option("--depth", f.depth, "Override encoder depth");
    cmd->add_option("--heads", f.heads, "Override attention heads");
    cmd->add_option("--classes", f.classes, "Class count (default: read from head.bias)");
    cmd->add_option("--mean", f.mean, "Normalization mean as r,g,b (default ImageNet)");
    cmd->add_option("--std", f.std, "Normalization std as r,g,b (default ImageNet)");
}

void add_search_flags(CLI::App* cmd, SearchFlags& f) {
    cmd->add_option("--target", f.target, "Target class index or 'auto'")->capture_default_str();
    cmd->add_option("--max-iters", f.max_iters, "Step limit (default: token count)")->check(CLI::NonNegativeNumber);
    cmd->add_option("--workers", f.workers, "Candidate-evaluation threads")->check(CLI::PositiveNumber);
    cmd->add_option("--wave", f.wave, "Candidates evaluated per wave (0 = all)");
}

void parse_triplet(const std::string& text, float out[3], const char* flag) {
    std::stringstream in(text);
    std::string item;
    int n = 0;
    while (std::getline(in, item, ',')) {
        if (n == 3) throw CallFailed{TI_ERR_INVALID_ARGUMENT, std::string(flag) + " needs exactly 3 values"};
        try {
            out[n++] = std::stof(item);
        } catch (const std::exception&) {
            throw CallFailed{TI_ERR_INVALID_ARGUMENT, std::string(flag) + ": cannot parse '" + item + "'"};
        }
    }
    if (n != 3) throw CallFailed{TI_ERR_INVALID_ARGUMENT, std::string(flag) + " needs exactly 3 values"};
}

ti_preprocess resolve_preprocess(const ModelFlags& f) {
    ti_preprocess pre;
    ti_preprocess_default(&pre);
    if (!f.mean.empty()) parse_triplet(f.mean, pre.mean, "--mean");
    if (!f.std.empty()) parse_triplet(f.std, pre.std, "--std");
    return pre;
}

ModelPtr load_model(const ModelFlags& f) {
    ti_config config{};
    check(ti_config_preset(f.config.c_str(), &config));
    if (f.image_size) config.image_size = *f.image_size;
    if (f.patch_size) config.patch_size = *f.patch_size;
    if (f.dim) config.dim = *f.dim;
    if (f.depth) config.depth = *f.depth;
    if (f.heads) config.heads = *f.heads;
    config.num_classes = f.classes.value_or(0);
    ti_model* model = nullptr;
    check(ti_model_load(f.weights.c_str(), &config, &model), f.weights);
    return ModelPtr(model);
}

ti_explain_options resolve_search(const SearchFlags& f) {
    ti_explain_options opts;
    ti_explain_options_default(&opts);
    if (f.target != "auto") {
        try {
            std::size_t used = 0;
            const long long value = std::stoll(f.target, &used);
            if (used != f.target.size() || value < 0) throw std::invalid_argument(f.target);
            opts.target_class = value;
        } catch (const std::exception&) {
            throw CallFailed{TI_ERR_INVALID_ARGUMENT, "--target must be 'auto' or a class index, got '" + f.target + "'"};
        }
    }
    if (f.max_iters) opts.max_iters = *f.max_iters;
    opts.workers = f.workers;
    opts.wave_size = f.wave;
    return opts;
}

ImagePtr load_image(const std::string& path) {
    ti_image* image = nullptr;
    check(ti_image_load(path.c_str(), &image));
    return ImagePtr(image);
}

ImagePtr at_model_resolution(const ti_model* model, const ti_image* image) {
    ti_config config{};
    check(ti_model_config(model, &config));
    ti_image* resized = nullptr;
    check(ti_image_resize(image, config.image_size, config.image_size, &resized));
    return ImagePtr(resized);
}

void write_overlay(const ti_model* model, const ti_image* image, const ti_importance* map, const std::string& path) {
    const ImagePtr base = at_model_resolution(model, image);
    ti_image* overlay = nullptr;
    check(ti_render_overlay(base.get(), map, &overlay));
    const ImagePtr owned(overlay);
    check(ti_image_write(owned.get(), path.c_str()));
}

std::string trace_json(const ti_trace* trace) {
    OwnedString json;
    check(ti_trace_to_json(trace, &json.text));
    return json.text;
}

void emit(const std::string& text, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream file(out_path, std::ios::binary | std::ios::trunc);
    if (!file || !(file << text)) throw CallFailed{TI_ERR_IO, "cannot write '" + out_path + "'"};
}

const char* status_word(ti_trace_status status) {
    switch (status) {
        case TI_TRACE_FLIPPED: return "flipped";
        case TI_TRACE_EXHAUSTED: return "exhausted";
        case TI_TRACE_MAX_ITERS_REACHED: return "max_iters_reached";
    }
    return "unknown";
}

int cmd_explain(const ModelFlags& mf, const SearchFlags& sf, const std::string& image_path,
                const std::string& overlay_path, const std::string& out_path) {
    const ti_preprocess pre = resolve_preprocess(mf);
    const ti_explain_options opts = resolve_search(sf);
    const ModelPtr model = load_model(mf);
    const ImagePtr image = load_image(image_path);

    ti_trace* raw = nullptr;
    check(ti_explain(model.get(), image.get(), &pre, &opts, &raw), image_path);
    const TracePtr trace(raw);
    emit(trace_json(trace.get()), out_path);

    if (!overlay_path.empty()) {
        ti_config config{};
        check(ti_model_config(model.get(), &config));
        ti_importance* map = nullptr;
        check(ti_trace_importance(trace.get(), config.image_size / config.patch_size, &map));
        const ImportancePtr owned(map);
        write_overlay(model.get(), image.get(), owned.get(), overlay_path);
    }
    if (!out_path.empty()) {
        std::cout << image_path << ": " << status_word(ti_trace_get_status(trace.get())) << " after "
                  << ti_trace_step_count(trace.get()) << " step(s)\n";
    }
    return kExitOk;
}

struct BatchResult {
    bool ok = false;
    std::string detail;
};

int cmd_batch(const ModelFlags& mf, const SearchFlags& sf, const std::string& dir, const std::string& out_dir,
              unsigned jobs) {
    const ti_preprocess pre = resolve_preprocess(mf);
    const ti_explain_options opts = resolve_search(sf);

    std::error_code ec;
    if (!fs::is_directory(dir, ec)) throw CallFailed{TI_ERR_IO, "'" + dir + "' is not a directory"};
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir, ec)) {
        if (entry.is_regular_file()) files.push_back(entry.path());
    }
    if (ec) throw CallFailed{TI_ERR_IO, "cannot list '" + dir + "': " + ec.message()};
    if (files.empty()) throw CallFailed{TI_ERR_EMPTY_INPUT, "no images found in '" + dir + "'"};
    std::sort(files.begin(), files.end());

    fs::create_directories(out_dir, ec);
    if (ec) throw CallFailed{TI_ERR_IO, "cannot create '" + out_dir + "': " + ec.message()};
    const ModelPtr model = load_model(mf);

    std::vector<BatchResult> results(files.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < files.size(); i = next++) {
            const fs::path trace_path = fs::path(out_dir) / (files[i].filename().string() + ".json");
            try {
                const ImagePtr image = load_image(files[i].string());
                ti_trace* raw = nullptr;
                check(ti_explain(model.get(), image.get(), &pre, &opts, &raw));
                const TracePtr trace(raw);
                check(ti_trace_write(trace.get(), trace_path.string().c_str()));
                results[i] = {true, trace_path.filename().string() + "\t" +
                                        status_word(ti_trace_get_status(trace.get())) + "\t" +
                                        std::to_string(ti_trace_step_count(trace.get()))};
            } catch (const CallFailed& e) {
                results[i] = {false, e.message};
            }
        }
    };
    {
        std::vector<std::jthread> pool;
        for (unsigned j = 0; j < std::max(1u, jobs); ++j) pool.emplace_back(worker);
    }

    std::ostringstream log;
    std::size_t ok = 0;
    for (std::size_t i = 0; i < files.size(); ++i) {
        const std::string name = files[i].filename().string();
        if (results[i].ok) {
            ++ok;
            log << "ok\t" << name << "\t" << results[i].detail << "\n";
        } else {
            log << "skip\t" << name << "\t" << results[i].detail << "\n";
            std::cerr << "skipped " << name << ": " << results[i].detail << "\n";
        }
    }
    emit(log.str(), (fs::path(out_dir) / "batch.log").string());
    std::cout << ok << " trace(s) written, " << files.size() - ok << " skipped\n";
    return ok > 0 ? kExitOk : kExitError;
}

void print_summary(const char* name, const ti_summary& s) {
    std::printf("%-18s n=%zu mean=%.6g median=%.6g q1=%.6g q3=%.6g min=%.6g max=%.6g\n", name, s.count, s.mean,
                s.median, s.q1, s.q3, s.min, s.max);
}

int cmd_stats(const std::string& traces_dir, const std::string& out_dir) {
    std::error_code ec;
    if (!fs::is_directory(traces_dir, ec)) throw CallFailed{TI_ERR_IO, "'" + traces_dir + "' is not a directory"};
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(traces_dir, ec)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
    }
    if (files.empty()) throw CallFailed{TI_ERR_EMPTY_INPUT, "no trace files (*.json) in '" + traces_dir + "'"};
    std::sort(files.begin(), files.end());

    ti_cohort* raw = nullptr;
    check(ti_cohort_create(&raw));
    const CohortPtr cohort(raw);
    for (const auto& file : files) {
        ti_trace* trace = nullptr;
        check(ti_trace_read(file.string().c_str(), &trace));
        const TracePtr owned(trace);
        check(ti_cohort_add(cohort.get(), file.stem().string().c_str(), owned.get()));
    }
    check(ti_cohort_write(cohort.get(), out_dir.c_str()));

    ti_summary discarded{}, drop{};
    check(ti_cohort_summary(cohort.get(), &discarded, &drop));
    print_summary("tokens_discarded", discarded);
    print_summary("max_single_drop", drop);
    return kExitOk;
}

int cmd_occlude(const ModelFlags& mf, const std::string& image_path, const std::string& fill_name, unsigned workers,
                const std::string& overlay_path, const std::string& out_path) {
    const ti_fill fill = fill_name == "black" ? TI_FILL_BLACK : TI_FILL_MEAN;
    const ti_preprocess pre = resolve_preprocess(mf);
    const ModelPtr model = load_model(mf);
    const ImagePtr image = load_image(image_path);
    ti_importance* raw = nullptr;
    check(ti_occlude(model.get(), image.get(), &pre, fill, workers, &raw), image_path);
    const ImportancePtr map(raw);
    OwnedString json;
    check(ti_importance_to_json(map.get(), &json.text));
    emit(json.text, out_path);
    if (!overlay_path.empty()) write_overlay(model.get(), image.get(), map.get(), overlay_path);
    return kExitOk;
}

int cmd_inspect(const std::string& weights) {
    ti_archive* raw = nullptr;
    check(ti_archive_open(weights.c_str(), &raw), weights);
    const ArchivePtr archive(raw);
    std::printf("%-32s %-16s %12s %12s\n", "name", "shape", "offset", "nbytes");
    for (std::size_t i = 0; i < ti_archive_size(archive.get()); ++i) {
        ti_archive_entry_info e{};
        check(ti_archive_entry(archive.get(), i, &e));
        std::string shape = "[";
        for (std::size_t d = 0; d < e.rank; ++d) shape += (d ? "x" : "") + std::to_string(e.shape[d]);
        shape += "]";
        std::printf("%-32s %-16s %12llu %12llu\n", e.name, shape.c_str(), static_cast<unsigned long long>(e.offset),
                    static_cast<unsigned long long>(e.nbytes));
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Greedy token-discarding attribution for ViT classifiers"};
    app.require_subcommand(1);

    ModelFlags explain_model, batch_model, occlude_model;
    SearchFlags explain_search, batch_search;
    std::string image, overlay, out, dir, out_dir, traces, fill = "mean", weights;
    unsigned jobs = 1, occlude_workers = 1;

    auto* explain = app.add_subcommand("explain", "Trace the tokens whose removal flips one prediction");
    explain->add_option("--image", image, "Input image (PNG or PPM)")->required();
    add_model_flags(explain, explain_model);
    add_search_flags(explain, explain_search);
    explain->add_option("--overlay", overlay, "Write an overlay image (.png or .ppm)");
    explain->add_option("--out", out, "Trace JSON path (default: stdout)");

    auto* batch = app.add_subcommand("batch", "Explain every image in a directory");
    batch->add_option("--dir", dir, "Image directory")->required();
    add_model_flags(batch, batch_model);
    add_search_flags(batch, batch_search);
    batch->add_option("--out-dir", out_dir, "Directory for traces and batch.log")->required();
    batch->add_option("--jobs", jobs, "Images processed in parallel")->check(CLI::PositiveNumber);

    auto* stats = app.add_subcommand("stats", "Aggregate a directory of traces");
    stats->add_option("--traces", traces, "Directory of trace JSON files")->required();
    stats->add_option("--out", out_dir, "Output directory for CSV and JSON")->required();

    auto* occlude = app.add_subcommand("occlude", "Patch-occlusion baseline");
    occlude->add_option("--image", image, "Input image (PNG or PPM)")->required();
    add_model_flags(occlude, occlude_model);
    occlude->add_option("--fill", fill, "Occlusion fill")->check(CLI::IsMember({"black", "mean"}))->capture_default_str();
    occlude->add_option("--workers", occlude_workers, "Evaluation threads")->check(CLI::PositiveNumber);
    occlude->add_option("--overlay", overlay, "Write an overlay image (.png or .ppm)");
    occlude->add_option("--out", out, "Importance JSON path (default: stdout)");

    auto* inspect = app.add_subcommand("inspect", "List the tensors in a weight archive");
    inspect->add_option("--weights", weights, "TNSA weight archive")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitError;
    }

    try {
        if (*explain) return cmd_explain(explain_model, explain_search, image, overlay, out);
        if (*batch) return cmd_batch(batch_model, batch_search, dir, out_dir, jobs);
        if (*stats) return cmd_stats(traces, out_dir);
        if (*occlude) return cmd_occlude(occlude_model, image, fill, occlude_workers, overlay, out);
        if (*inspect) return cmd_inspect(weights);
    } catch (const CallFailed& e) {
        std::cerr << "error: " << e.message << "\n";
        return e.status == TI_ERR_INITIAL_MISPREDICTION ? kExitMisprediction : kExitError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }
    return kExitError;
}
