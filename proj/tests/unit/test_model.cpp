#include <doctest.h>

#include <cmath>
#include <fstream>

#include "cognet/common/errors.hpp"
#include "cognet/common/rng.hpp"
#include "cognet/model/checkpoint.hpp"
#include "cognet/model/class_embedding.hpp"
#include "cognet/model/cognet.hpp"
#include "cognet/model/discriminator.hpp"
#include "cognet/model/encoder.hpp"
#include "cognet/model/generator.hpp"
#include "cognet/model/sc_adain.hpp"
#include "helpers.hpp"

using namespace cognet;
using namespace cognet::model;
using testing::TempDir;

namespace {

constexpr auto f64 = torch::kFloat64;

ModelConfig small_config()
{
    ModelConfig c;
    c.image_size = 32;
    c.num_scales = 3;
    c.channels = {8, 12, 16};
    c.disc_channels = {8, 12, 16};
    c.num_classes = 4;
    c.z_dim = 8;
    c.mapped_dim = 8;
    c.h_dim = 6;
    return c;
}

struct Inputs {
    torch::Tensor masked, hole, z;
};

Inputs random_inputs(const ModelConfig& c, Rng& rng, int64_t b = 2, torch::ScalarType dtype = torch::kFloat32)
{
    const int64_t n = c.image_size;
    auto target = rand_uniform(rng, {b, 3, n, n}, dtype) * 2.0 - 1.0;
    auto hole = torch::zeros({b, 1, n, n}, dtype);
    hole.slice(2, n / 4, n / 2 + 2).slice(3, n / 3, 3 * n / 4).fill_(1.0);
    return {target * (1.0 - hole), hole, randn(rng, {b, c.z_dim}, dtype)};
}

// Direct transcription of the two normalization steps with explicit loops.
torch::Tensor naive_sc_adain(const torch::Tensor& x, const torch::Tensor& cg, const torch::Tensor& cb,
                             const torch::Tensor& sg, const torch::Tensor& sb, double eps)
{
    const int64_t B = x.size(0), C = x.size(1), H = x.size(2), W = x.size(3);
    auto X = x.accessor<double, 4>();
    auto mid = torch::zeros_like(x);
    auto M = mid.accessor<double, 4>();
    auto G = cg.accessor<double, 2>();
    auto Bt = cb.accessor<double, 2>();
    for (int64_t b = 0; b < B; ++b)
        for (int64_t c = 0; c < C; ++c) {
            double mu = 0;
            for (int64_t i = 0; i < H; ++i)
                for (int64_t j = 0; j < W; ++j) mu += X[b][c][i][j];
            mu /= static_cast<double>(H * W);
            double var = 0;
            for (int64_t i = 0; i < H; ++i)
                for (int64_t j = 0; j < W; ++j) var += (X[b][c][i][j] - mu) * (X[b][c][i][j] - mu);
            var /= static_cast<double>(H * W);
            const double sigma = std::sqrt(var + eps);
            for (int64_t i = 0; i < H; ++i)
                for (int64_t j = 0; j < W; ++j) M[b][c][i][j] = G[b][c] * (X[b][c][i][j] - mu) / sigma + Bt[b][c];
        }
    auto out = torch::zeros_like(x);
    auto O = out.accessor<double, 4>();
    auto SG = sg.accessor<double, 4>();
    auto SB = sb.accessor<double, 4>();
    for (int64_t b = 0; b < B; ++b)
        for (int64_t i = 0; i < H; ++i)
            for (int64_t j = 0; j < W; ++j) {
                double mu = 0;
                for (int64_t c = 0; c < C; ++c) mu += M[b][c][i][j];
                mu /= static_cast<double>(C);
                double var = 0;
                for (int64_t c = 0; c < C; ++c) var += (M[b][c][i][j] - mu) * (M[b][c][i][j] - mu);
                var /= static_cast<double>(C);
                const double sigma = std::sqrt(var + eps);
                for (int64_t c = 0; c < C; ++c)
                    O[b][c][i][j] = SG[b][c][i][j] * (M[b][c][i][j] - mu) / sigma + SB[b][c][i][j];
            }
    return out;
}

}  // namespace

TEST_CASE("config validation")
{
    ModelConfig c;
    CHECK_NOTHROW(c.validate());
    c.image_size = 60;  // not divisible by 2^(L-1) = 8
    CHECK_THROWS_AS(c.validate(), InvalidInput);
    c = ModelConfig{};
    c.channels = {8, 16};
    CHECK_THROWS_AS(c.validate(), InvalidInput);
    c = ModelConfig{};
    c.use_pce = false;
    c.use_top_down = true;
    CHECK_THROWS_AS(c.validate(), InvalidInput);
    c = ModelConfig{};
    CHECK(c.style_dim() == c.mapped_dim + c.h_dim);
    CHECK(ModelConfig::from_json(c.to_json()).to_json() == c.to_json());
}

TEST_CASE("bottom-up encoder: pyramid shapes and finiteness")
{
    torch::manual_seed(0);
    ModelConfig c;  // N = 64, L = 4
    Encoder enc(4, c);
    auto x = torch::cat({torch::zeros({1, 3, 64, 64}), torch::ones({1, 1, 64, 64})}, 1);
    auto p = enc(x);
    REQUIRE(p.maps.size() == 4);
    for (int64_t l = 0; l < 4; ++l) {
        CHECK(p.maps[static_cast<size_t>(l)].sizes() == torch::IntArrayRef({1, c.channels[static_cast<size_t>(l)], 64 >> l, 64 >> l}));
        CHECK(torch::isfinite(p.maps[static_cast<size_t>(l)]).all().item<bool>());
    }
    Rng rng = derive_rng(1, 1);
    auto r = enc(torch::cat({randn(rng, {2, 3, 64, 64}), torch::zeros({2, 1, 64, 64})}, 1));
    CHECK(r.maps[3].sizes() == torch::IntArrayRef({2, c.channels[3], 8, 8}));

    auto bad = x.clone();
    bad[0][0][3][3] = std::nan("");
    CHECK_THROWS_AS(enc(bad), InvalidInput);
}

TEST_CASE("bottom-up encoder ignores what was under the hole")
{
    torch::manual_seed(1);
    auto c = small_config();
    CogNet g(c);
    Rng rng = derive_rng(2, 2);
    auto in = random_inputs(c, rng);
    auto other_target = randn(rng, in.masked.sizes());
    // Same known pixels, different hidden content, both zero-filled.
    auto masked_again = torch::where(in.hole > 0.5, torch::zeros_like(other_target), in.masked);
    auto a = g->encode_bottom_up(in.masked, in.hole);
    auto b = g->encode_bottom_up(masked_again, in.hole);
    for (size_t l = 0; l < a.maps.size(); ++l) CHECK(torch::equal(a.maps[l], b.maps[l]));
}

TEST_CASE("class embedding: normalization, symmetry and recomputation")
{
    torch::manual_seed(3);
    auto c = small_config();
    ClassEmbedding pce(c);
    pce->to(f64);
    Rng rng = derive_rng(3, 3);
    auto deepest = randn(rng, {5, c.channels.back(), 8, 8}, f64);
    auto p = pce(deepest);
    CHECK(testing::max_abs(p.probabilities.sum(1), torch::ones({5}, f64)) <= 1e-6);
    CHECK(p.probabilities.min().item<double>() >= 0.0);

    // Independent path: explicit matrix products and a hand-written softmax.
    auto flat = deepest.reshape({5, -1});
    auto h = flat.matmul(pce->project->weight.t()) + pce->project->bias;
    auto logits = h.matmul(pce->classifier->weight.t()) + pce->classifier->bias;
    auto e = (logits - std::get<0>(logits.max(1, true))).exp();
    auto probs = e / e.sum(1, true);
    CHECK(testing::max_abs(p.embedding, h) <= 1e-10);
    CHECK(testing::max_abs(p.probabilities, probs) <= 1e-6);

    {
        torch::NoGradGuard guard;
        pce->classifier->weight.zero_();
        pce->classifier->bias.zero_();
    }
    auto u = pce(torch::zeros_like(deepest));
    CHECK(testing::max_abs(u.probabilities, torch::full({5, c.num_classes}, 1.0 / c.num_classes, f64)) <= 1e-12);
}

TEST_CASE("argmax of the prediction is invariant to positive logit scaling")
{
    Rng rng = derive_rng(4, 4);
    auto logits = randn(rng, {64, 5}, f64);
    for (double s : {0.01, 0.5, 3.0, 100.0})
        CHECK(torch::equal(torch::softmax(logits * s, 1).argmax(1), torch::softmax(logits, 1).argmax(1)));
}

TEST_CASE("semantic object map")
{
    auto hole = torch::zeros({1, 1, 16, 16}, f64);
    hole.slice(2, 3, 13).slice(3, 3, 13).fill_(1.0);  // 100 pixels
    auto onehot = torch::zeros({1, 4}, f64);
    onehot[0][2] = 1.0;
    auto y = make_semantic_map(onehot, hole);
    CHECK(torch::equal(y[0][2], hole[0][0]));
    CHECK(y.sum().item<double>() == 100.0);

    auto none = make_semantic_map(onehot, torch::zeros_like(hole));
    CHECK(none.abs().sum().item<double>() == 0.0);

    auto uniform = torch::full({1, 4}, 0.25, f64);
    auto yu = make_semantic_map(uniform, hole);
    for (int64_t k = 0; k < 4; ++k) CHECK(std::abs(yu[0][k].sum().item<double>() - 25.0) <= 1e-4);
    CHECK(torch::equal(yu.sum(1, true), hole));
    CHECK(yu.masked_select((hole == 0).expand_as(yu)).abs().max().item<double>() == 0.0);

    CHECK_THROWS_AS(make_semantic_map(torch::ones({2, 4}, f64), hole), InvalidInput);
    CHECK(torch::equal(harden(torch::tensor({{0.1, 0.6, 0.3}})), torch::tensor({{0.0f, 1.0f, 0.0f}})));
}

TEST_CASE("top-down encoder: zero maps, channel symmetry, addable shapes")
{
    torch::manual_seed(5);
    auto c = small_config();
    CogNet g(c);
    auto zero = torch::zeros({1, c.num_classes, 32, 32});
    auto a = g->top_down(zero);
    for (const auto& m : a.maps) CHECK(torch::isfinite(m).all().item<bool>());
    auto swapped = zero.index_select(1, torch::tensor({1, 0, 2, 3}));
    auto b = g->top_down(swapped);
    for (size_t l = 0; l < a.maps.size(); ++l) CHECK(torch::equal(a.maps[l], b.maps[l]));

    Rng rng = derive_rng(5, 5);
    auto in = random_inputs(c, rng, 1);
    auto bu = g->encode_bottom_up(in.masked, in.hole);
    auto td = g->top_down(rand_uniform(rng, {1, c.num_classes, 32, 32}));
    for (size_t l = 0; l < bu.maps.size(); ++l) CHECK(bu.maps[l].sizes() == td.maps[l].sizes());
}

TEST_CASE("style code")
{
    torch::manual_seed(6);
    auto c = small_config();
    MappingNetwork mapping(c);
    Rng rng = derive_rng(6, 6);
    auto z1 = randn(rng, {3, c.z_dim});
    auto z2 = randn(rng, {3, c.z_dim});
    auto h = randn(rng, {3, c.h_dim});
    auto w1 = make_style_code(z1, h, mapping, c);
    CHECK(torch::equal(w1, make_style_code(z1, h, mapping, c)));
    CHECK(w1.size(1) == c.mapped_dim + c.h_dim);
    auto w2 = make_style_code(z2, h, mapping, c);
    CHECK(torch::equal(w1.slice(1, c.mapped_dim), w2.slice(1, c.mapped_dim)));
    CHECK_FALSE(torch::equal(w1.slice(1, 0, c.mapped_dim), w2.slice(1, 0, c.mapped_dim)));
    // The latent is rescaled to radius sqrt(z_dim) before the first layer.
    const auto act = [](const torch::Tensor& x) { return torch::leaky_relu(x, 0.2); };
    const auto radius = std::sqrt(static_cast<double>(c.z_dim));
    const auto expected = act(mapping->fc2(act(mapping->fc1(z1 * radius / z1.norm(2, 1, true)))));
    CHECK(testing::max_abs(mapping(z1), expected) < 1e-5);
    CHECK(testing::max_abs(make_style_code(z1 * 7.0, h, mapping, c), w1) < 1e-5);
    CHECK_THROWS_AS(make_style_code(randn(rng, {3, c.z_dim + 1}), h, mapping, c), InvalidInput);
    CHECK_THROWS_AS(make_style_code(z1, randn(rng, {3, c.h_dim + 2}), mapping, c), InvalidInput);
}

TEST_CASE("sc_adain matches the naive reference in 64-bit")
{
    Rng rng = derive_rng(7, 7);
    double worst = 0;
    for (int trial = 0; trial < 20; ++trial) {
        auto x = randn(rng, {2, 4, 8, 8}, f64) * 3.0 + 1.5;
        auto cg = randn(rng, {2, 4}, f64), cb = randn(rng, {2, 4}, f64);
        auto sg = randn(rng, {2, 4, 8, 8}, f64), sb = randn(rng, {2, 4, 8, 8}, f64);
        worst = std::max(worst, testing::max_abs(sc_adain(x, cg, cb, sg, sb), naive_sc_adain(x, cg, cb, sg, sb, kNormEps)));
    }
    CHECK(worst < 1e-10);
}

TEST_CASE("sc_adain normalization steps with identity affine")
{
    Rng rng = derive_rng(8, 8);
    auto x = randn(rng, {3, 6, 8, 8}, f64) * 5.0 - 2.0;
    auto step1 = channel_modulate(x, torch::ones({3, 6}, f64), torch::zeros({3, 6}, f64));
    CHECK(step1.mean({2, 3}).abs().max().item<double>() < 1e-5);
    CHECK((step1.var({2, 3}, false).sqrt() - 1.0).abs().max().item<double>() < 1e-4);
    auto full = sc_adain(x, torch::ones({3, 6}, f64), torch::zeros({3, 6}, f64), torch::ones_like(x), torch::zeros_like(x));
    CHECK(full.mean(1).abs().max().item<double>() < 1e-5);
    CHECK((full.var(1, false).sqrt() - 1.0).abs().max().item<double>() < 1e-4);

    // Constant maps have zero variance and must stay finite.
    auto flat = torch::full({1, 6, 8, 8}, 3.0, f64);
    CHECK(torch::isfinite(sc_adain(flat, torch::ones({1, 6}, f64), torch::zeros({1, 6}, f64), torch::ones_like(flat),
                                   torch::zeros_like(flat)))
              .all()
              .item<bool>());
}

TEST_CASE("sc_adain module starts at the identity affine")
{
    torch::manual_seed(9);
    ScAdaIN block(6, 5);
    block->to(f64);
    {
        torch::NoGradGuard guard;
        block->channel_gamma->weight.zero_();
        block->channel_beta->weight.zero_();
        block->spatial_gamma->weight.zero_();
        block->spatial_beta->weight.zero_();
    }
    Rng rng = derive_rng(9, 9);
    auto x = randn(rng, {2, 6, 8, 8}, f64);
    auto w = randn(rng, {2, 5}, f64);
    auto f = randn(rng, {2, 6, 8, 8}, f64);
    auto expected = sc_adain(x, torch::ones({2, 6}, f64), torch::zeros({2, 6}, f64), torch::ones_like(x), torch::zeros_like(x));
    CHECK(testing::max_abs(block(x, w, f), expected) < 1e-12);
    CHECK_THROWS_AS(block(x, w, randn(rng, {2, 5, 8, 8}, f64)), InvalidInput);
}

TEST_CASE("generator: determinism, latent diversity, bounded output")
{
    torch::manual_seed(10);
    auto c = small_config();
    CogNet g(c);
    g->eval();
    Rng rng = derive_rng(10, 10);
    auto in = random_inputs(c, rng);
    auto a = g->forward(in.masked, in.hole, in.z);
    auto b = g->forward(in.masked, in.hole, in.z);
    CHECK(torch::equal(a.output, b.output));
    CHECK(a.output.abs().max().item<double>() <= 1.0);
    auto other = g->forward(in.masked, in.hole, randn(rng, in.z.sizes()));
    CHECK((other.output - a.output).abs().max().item<double>() > 0.0);

    CHECK(a.output.sizes() == torch::IntArrayRef({2, 3, 32, 32}));
    CHECK(a.semantic_map.sizes() == torch::IntArrayRef({2, c.num_classes, 32, 32}));
    CHECK(a.prediction.probabilities.sizes() == torch::IntArrayRef({2, c.num_classes}));
    CHECK(torch::equal(a.composite.masked_select(in.hole.expand_as(in.masked) == 0),
                       in.masked.masked_select(in.hole.expand_as(in.masked) == 0)));
}

TEST_CASE("decoder names the scale that went non-finite")
{
    torch::manual_seed(11);
    auto c = small_config();
    CogNet g(c);
    Rng rng = derive_rng(11, 11);
    auto in = random_inputs(c, rng, 1);
    auto bu = g->encode_bottom_up(in.masked, in.hole);
    auto style = torch::full({1, c.style_dim()}, std::numeric_limits<float>::infinity());
    try {
        g->decoder(bu, bu.zeros_like(), style);
        FAIL("expected a numerical error");
    } catch (const NumericalError& e) {
        CHECK(std::string(e.what()).find("scale") != std::string::npos);
    }
}

TEST_CASE("training mode uses the ground-truth class map")
{
    torch::manual_seed(12);
    auto c = small_config();
    CogNet g(c);
    Rng rng = derive_rng(12, 12);
    auto in = random_inputs(c, rng);
    auto onehot = torch::zeros({2, c.num_classes});
    onehot[0][1] = 1.0;
    onehot[1][3] = 1.0;
    auto out = g->forward(in.masked, in.hole, in.z, {Mode::Train}, onehot);
    CHECK(torch::equal(out.semantic_map[0][1], in.hole[0][0]));
    CHECK(torch::equal(out.semantic_map[1][3], in.hole[1][0]));
    CHECK_THROWS_AS(g->forward(in.masked, in.hole, in.z, {Mode::Train}), InvalidInput);

    auto hard = g->forward(in.masked, in.hole, in.z, {Mode::Inference, true});
    CHECK(torch::equal(hard.semantic_map.sum({2, 3}).gt(0).to(torch::kLong).sum(1), torch::ones({2}, torch::kLong)));
}

TEST_CASE("ablation flags zero the top-down pyramid and the embedding")
{
    torch::manual_seed(13);
    auto c = small_config();
    c.use_top_down = false;
    CogNet g(c);
    Rng rng = derive_rng(13, 13);
    auto in = random_inputs(c, rng);
    auto out = g->forward(in.masked, in.hole, in.z);
    for (size_t l = 0; l < out.top_down.maps.size(); ++l) {
        CHECK(out.top_down.maps[l].abs().max().item<double>() == 0.0);
        CHECK(torch::equal(out.bottom_up.maps[l] + out.top_down.maps[l], out.bottom_up.maps[l]));
    }
    c.use_pce = false;
    CogNet plain(c);
    auto p = plain->forward(in.masked, in.hole, in.z);
    CHECK(p.style.slice(1, c.mapped_dim).abs().max().item<double>() == 0.0);
}

TEST_CASE("composite matches the elementwise blend")
{
    Rng rng = derive_rng(14, 14);
    auto gen = randn(rng, {2, 3, 16, 16});
    auto input = randn(rng, {2, 3, 16, 16});
    auto hole = (rand_uniform(rng, {2, 1, 16, 16}) < 0.4).to(torch::kFloat32);
    CHECK(torch::equal(composite(gen, input, hole), hole * gen + (1.0 - hole) * input));
    CHECK(torch::equal(composite(gen, input, torch::ones_like(hole)), gen));
    CHECK(torch::equal(composite(gen, input, torch::zeros_like(hole)), input));
}

TEST_CASE("discriminator: scores per image, sensitive to hole pixels")
{
    torch::manual_seed(15);
    auto c = small_config();
    Discriminator d(c);
    CHECK(torch::isfinite(d(torch::zeros({1, 3, 32, 32}))).all().item<bool>());
    Rng rng = derive_rng(15, 15);
    auto x = randn(rng, {5, 3, 32, 32}).requires_grad_(true);
    auto s = d(x);
    CHECK(s.sizes() == torch::IntArrayRef({5}));
    auto grad = torch::autograd::grad({s.sum()}, {x})[0];
    CHECK(grad.slice(2, 10, 20).slice(3, 10, 20).norm().item<double>() > 0.0);
}

TEST_CASE("single-threaded forward passes are bit-identical")
{
    auto c = small_config();
    torch::manual_seed(16);
    CogNet a(c);
    torch::manual_seed(16);
    CogNet b(c);
    Rng r1 = derive_rng(16, 0), r2 = derive_rng(16, 0);
    auto i1 = random_inputs(c, r1), i2 = random_inputs(c, r2);
    CHECK(torch::equal(a->forward(i1.masked, i1.hole, i1.z).output, b->forward(i2.masked, i2.hole, i2.z).output));
}

TEST_CASE("checkpoint round trip is bit-identical")
{
    torch::manual_seed(17);
    auto c = small_config();
    CogNet g(c);
    Discriminator d(c);
    Checkpoint ck;
    ck.model = c;
    ck.params = named_tensors(*g, "generator");
    for (auto& [k, v] : named_tensors(*d, "discriminator")) ck.params[k] = v;
    ck.optimizer["generator.decoder.constant.exp_avg"] = torch::randn({3, 4}, f64);
    ck.metadata["step"] = 42;
    TempDir dir("ckpt");
    save_checkpoint(dir / "ck", ck);
    CHECK_FALSE(std::filesystem::exists(dir.path / "ck.tmp"));
    auto back = load_checkpoint(dir / "ck");
    REQUIRE(back.params.size() == ck.params.size());
    for (const auto& [k, v] : ck.params) CHECK(testing::bit_equal(back.params.at(k), v));
    CHECK(testing::bit_equal(back.optimizer.at("generator.decoder.constant.exp_avg"),
                             ck.optimizer.at("generator.decoder.constant.exp_avg")));
    CHECK(back.metadata.at("step") == 42);
    CHECK(back.model.to_json() == c.to_json());

    torch::manual_seed(99);
    CogNet fresh(c);
    load_named_tensors(*fresh, back.params, "generator");
    for (const auto& [k, v] : named_tensors(*fresh, "generator")) CHECK(testing::bit_equal(v, ck.params.at(k)));

    TensorMap partial = back.params;
    partial.erase("generator.decoder.constant");
    CHECK_THROWS_AS(load_named_tensors(*fresh, partial, "generator"), ParseError);
    TensorMap wrong = back.params;
    wrong["generator.decoder.constant"] = torch::zeros({1});
    CHECK_THROWS_AS(load_named_tensors(*fresh, wrong, "generator"), ParseError);

    std::ofstream(dir.path / "ck" / "params.pt", std::ios::trunc) << "garbage";
    CHECK_THROWS_AS(load_checkpoint(dir / "ck"), ParseError);
}
