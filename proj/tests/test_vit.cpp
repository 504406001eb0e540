#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "masked_forward.hpp"
#include "tokinsight/error.hpp"
#include "tokinsight/vit.hpp"

using namespace tokinsight;
using namespace tokinsight::testing;

namespace {

double max_rel_diff(const Tensor& a, const nlohmann::json& ref) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double r = ref[i].get<double>();
        worst = std::max(worst, std::abs(a[i] - r) / std::max(std::abs(r), 1e-3));
    }
    return worst;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, double(std::abs(a[i] - b[i])));
    return worst;
}

TokenSubset random_subset(std::mt19937& rng, std::size_t n) {
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), 0);
    std::shuffle(all.begin(), all.end(), rng);
    const std::size_t keep = std::uniform_int_distribution<std::size_t>(0, n)(rng);
    all.resize(keep);
    return TokenSubset::of(all, n);
}

}  // namespace

TEST_CASE("config presets and validation") {
    const ViTConfig b16 = *config_preset("vitb16");
    CHECK(b16.token_count() == 196);
    CHECK(b16.patch_dim() == 768);
    CHECK(b16.hidden_dim() == 3072);
    CHECK(tiny_config().token_count() == 16);
    CHECK_FALSE(config_preset("vitl").has_value());

    ViTConfig bad = tiny_config();
    bad.image_size = 30;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = tiny_config();
    bad.heads = 5;
    CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("patchify orders patches row-major and flattens channel-major") {
    const ViTConfig cfg = tiny_config();
    Tensor chw({3, 32, 32});
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t y = 0; y < 32; ++y)
            for (std::size_t x = 0; x < 32; ++x)
                chw[(c * 32 + y) * 32 + x] = static_cast<float>(100 * c + 4 * (y / 8) + x / 8);
    const Tensor patches = patchify(chw, cfg);
    CHECK(patches.shape() == Shape{16, 192});
    for (std::size_t k = 0; k < 16; ++k) {
        for (std::size_t j = 0; j < 192; ++j) {
            CHECK(patches.at(k, j) == static_cast<float>(100 * (j / 64) + k));
        }
    }
    Tensor ramp({3, 32, 32});
    for (std::size_t i = 0; i < ramp.size(); ++i) ramp[i] = static_cast<float>(i);
    const Tensor p = patchify(ramp, cfg);
    // token 5 is grid row 1, col 1; element (c=2, dy=3, dx=4)
    CHECK(p.at(5, 2 * 64 + 3 * 8 + 4) == ramp[(2 * 32 + 8 + 3) * 32 + 8 + 4]);
    CHECK_THROWS_AS(patchify(Tensor({3, 32, 24}), cfg), Error);
}

TEST_CASE("embedding is the patch projection plus positional row k+1") {
    const VitModel model = tiny_model();
    const auto& w = model.weights();
    std::mt19937 rng(7);
    std::normal_distribution<float> normal;
    Tensor patches({16, 192});
    for (auto& v : patches.data()) v = normal(rng);
    const TokenSequence seq = model.embed(patches);
    const Tensor proj = linear(patches, w.patch_embed_weight, w.patch_embed_bias);
    for (std::size_t k = 0; k < 16; ++k)
        for (std::size_t j = 0; j < 64; ++j)
            CHECK(seq.embeddings.at(k, j) == doctest::Approx(proj.at(k, j) + w.pos_embed.at(k + 1, j)).epsilon(1e-6));
    for (std::size_t j = 0; j < 64; ++j) CHECK(seq.cls[j] == w.cls_token[j] + w.pos_embed.at(0, j));
}

TEST_CASE("golden embeddings and logits from the reference implementation") {
    const VitModel model = tiny_model();
    const auto g = golden();
    const InputImage img = load_image(fixture("tiny_input.ppm"));
    const TokenSequence seq = model.tokenize(img);
    Tensor first({64}), last({64});
    for (std::size_t j = 0; j < 64; ++j) {
        first[j] = seq.embeddings.at(0, j);
        last[j] = seq.embeddings.at(15, j);
    }
    CHECK(max_rel_diff(first, g["tokens0"]) < 1e-5);
    CHECK(max_rel_diff(last, g["tokens_last"]) < 1e-5);
    CHECK(max_rel_diff(seq.cls, g["cls"]) < 1e-5);

    const Prediction p = model.predict(img);
    CHECK(max_rel_diff(p.logits, g["logits"]) < 1e-4);
    CHECK(max_rel_diff(p.probs, g["probs"]) < 1e-4);
    CHECK(p.top_class == 0);
}

TEST_CASE("removed tokens are absent: gather equals masked attention") {
    const VitModel model = tiny_model();
    const TokenSequence seq = model.tokenize(load_image(fixture("tiny_input.ppm")));
    std::mt19937 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const TokenSubset s = random_subset(rng, 16);
        std::vector<bool> present(16, false);
        for (std::size_t k : s.retained()) present[k] = true;
        CHECK(max_abs_diff(model.forward_subset(seq, s).logits, masked_logits(model, seq, present)) < 1e-5);
    }
}

TEST_CASE("cls logits do not depend on the order of retained tokens") {
    const VitModel model = tiny_model();
    const TokenSequence seq = model.tokenize(load_image(fixture("tiny_input.ppm")));
    std::mt19937 rng(12);
    for (int trial = 0; trial < 50; ++trial) {
        const TokenSubset s = random_subset(rng, 16);
        Tensor sequence = gather_sequence(seq, s);
        std::vector<std::size_t> order(s.size());
        std::iota(order.begin(), order.end(), 1);
        std::shuffle(order.begin(), order.end(), rng);
        Tensor shuffled = sequence;
        for (std::size_t i = 0; i < order.size(); ++i) {
            std::copy(sequence.row(order[i]).begin(), sequence.row(order[i]).end(), shuffled.row(i + 1).begin());
        }
        CHECK(max_abs_diff(model.forward_sequence(sequence), model.forward_sequence(shuffled)) < 1e-5);
    }
}

TEST_CASE("empty subset runs on the cls token alone") {
    const VitModel model = tiny_model();
    const TokenSequence seq = model.tokenize(load_image(fixture("tiny_input.ppm")));
    const TokenSubset none = TokenSubset::of({}, 16);
    CHECK(gather_sequence(seq, none).shape() == Shape{1, 64});
    const Prediction p = model.forward_subset(seq, none);
    CHECK(max_abs_diff(p.logits, masked_logits(model, seq, std::vector<bool>(16, false))) < 1e-5);
    float sum = 0.0f;
    for (float v : p.probs.data()) sum += v;
    CHECK(sum == doctest::Approx(1.0f));
}

TEST_CASE("gather keeps cls first and retained tokens in index order") {
    const VitModel model = tiny_model();
    const TokenSequence seq = model.tokenize(load_image(fixture("tiny_input.ppm")));
    const Tensor g = gather_sequence(seq, TokenSubset::of({9, 2, 14}, 16));
    CHECK(g.shape() == Shape{4, 64});
    const std::size_t order[] = {2, 9, 14};
    for (std::size_t j = 0; j < 64; ++j) {
        CHECK(g.at(0, j) == seq.cls[j]);
        for (std::size_t i = 0; i < 3; ++i) CHECK(g.at(i + 1, j) == seq.embeddings.at(order[i], j));
    }
}

TEST_CASE("224/16 geometry gives 196 tokens and a 197-row encoder input") {
    ViTConfig cfg = *config_preset("vitb16");
    cfg.dim = 8;
    cfg.heads = 2;
    cfg.depth = 1;
    const VitModel model(random_weights(cfg, 5));
    const InputImage img(224, 224, 0.5f);
    const TokenSequence seq = model.tokenize(img);
    CHECK(seq.embeddings.rows() == 196);
    CHECK(gather_sequence(seq, TokenSubset::full(196)).rows() == 197);
    CHECK(model.predict(img).num_classes() == 2);
}

TEST_CASE("load_model infers the class count and rejects bad files") {
    ViTConfig cfg = tiny_config();
    cfg.num_classes = 0;
    CHECK(load_model(fixture("tiny.tnsa"), cfg).config().num_classes == 2);
    cfg.num_classes = 3;
    CHECK_THROWS_AS(load_model(fixture("tiny.tnsa"), cfg), Error);
    CHECK_THROWS_AS(load_model(fixture("tiny_input.ppm"), tiny_config()), Error);
}

TEST_CASE("token subsets validate their indices") {
    CHECK(TokenSubset::of({3, 1}, 4).retained()[0] == 1);
    CHECK_THROWS_AS(TokenSubset::of({1, 1}, 4), Error);
    CHECK_THROWS_AS(TokenSubset::of({4}, 4), Error);
    CHECK_THROWS_AS(TokenSubset::full(4).without(2).without(2), Error);
    CHECK(TokenSubset::full(3).without(1) == TokenSubset::of({0, 2}, 3));
}
