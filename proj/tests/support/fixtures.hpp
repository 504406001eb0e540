#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "tokinsight/archive.hpp"
#include "tokinsight/config.hpp"
#include "tokinsight/vit.hpp"
#include "tokinsight/weights.hpp"

namespace tokinsight::testing {

inline std::filesystem::path fixture_dir() {
    return TI_FIXTURE_DIR;
}

inline std::filesystem::path fixture(const std::string& name) {
    return fixture_dir() / name;
}

inline ViTConfig tiny_config() {
    return *config_preset("tiny");
}

inline VitModel tiny_model() {
    return load_model(fixture("tiny.tnsa"), tiny_config());
}

inline nlohmann::json golden() {
    std::ifstream in(fixture("golden.json"));
    return nlohmann::json::parse(in);
}

/// Random weights that satisfy the canonical schema for `config`.
inline ViTWeights random_weights(const ViTConfig& config, unsigned seed, float scale = 0.3f) {
    std::mt19937 rng(seed);
    std::normal_distribution<float> normal(0.0f, scale);
    TensorMap tensors;
    for (const auto& [name, shape] : vit_schema(config)) {
        Tensor t(shape);
        for (auto& v : t.data()) v = normal(rng);
        if (name.find("ln") != std::string::npos && name.ends_with(".weight")) {
            for (auto& v : t.data()) v += 1.0f;
        }
        tensors.emplace(name, std::move(t));
    }
    return validate_vit_schema(tensors, config);
}

/// A scratch directory removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / ("tokinsight-" + tag + "-" + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

struct CommandResult {
    int exit_code = -1;
    std::string output;  // stdout and stderr together
};

/// Runs the CLI with `args` through the shell.
inline CommandResult run_cli(const std::string& args, const std::filesystem::path& scratch) {
    const auto log = scratch / "cli-output.txt";
    const std::string cmd = std::string("\"") + TI_CLI_PATH + "\" " + args + " > \"" + log.string() + "\" 2>&1";
    const int raw = std::system(cmd.c_str());
    CommandResult result;
    result.exit_code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    result.output = slurp(log);
    return result;
}

}  // namespace tokinsight::testing
