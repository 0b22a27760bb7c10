#include <doctest.h>

#include <cmath>

#include "cognet/common/errors.hpp"
#include "cognet/common/rng.hpp"
#include "cognet/losses/feature_extractor.hpp"
#include "cognet/losses/losses.hpp"
#include "helpers.hpp"

using namespace cognet;
using namespace cognet::losses;

namespace {

constexpr auto f64 = torch::kFloat64;

// Single linear layer: a fixed 1x1 convolution, so features scale linearly.
class LinearExtractor final : public FeatureExtractor {
public:
    explicit LinearExtractor(torch::Tensor w) : w_(std::move(w)) {}
    std::vector<torch::Tensor> layers(const torch::Tensor& x) override
    {
        return {torch::conv2d(x, w_.to(x.dtype()))};
    }
    int64_t feature_dim() const override { return w_.size(0); }

private:
    torch::Tensor w_;
};

}  // namespace

TEST_CASE("class loss values")
{
    auto t = torch::tensor({0.0, 1.0, 0.0, 0.0}, f64);
    CHECK(std::abs(class_loss(torch::full({4}, 0.25, f64), t).item<double>() - std::log(4.0)) <= 1e-6);
    CHECK(std::abs(class_loss(t, t).item<double>()) <= 1e-9);
    auto p = torch::tensor({0.7, 0.2, 0.1}, f64);
    CHECK(std::abs(class_loss(p, torch::tensor({0.0, 1.0, 0.0}, f64)).item<double>() + std::log(0.2)) <= 1e-6);
    auto zero_at_truth = torch::tensor({1.0, 0.0, 0.0}, f64);
    const double clamped = class_loss(zero_at_truth, torch::tensor({0.0, 0.0, 1.0}, f64)).item<double>();
    CHECK(std::isfinite(clamped));
    CHECK(std::abs(clamped + std::log(kProbFloor)) <= 1e-9);
    CHECK_THROWS_AS(class_loss(p, t), InvalidInput);
}

TEST_CASE("class loss gradient w.r.t. logits is softmax minus one-hot")
{
    Rng rng = derive_rng(1, 1);
    auto logits = randn(rng, {6, 5}, f64).requires_grad_(true);
    auto labels = torch::one_hot(torch::tensor(std::vector<int64_t>{0, 4, 2, 2, 1, 3}), 5).to(f64);
    auto loss = class_loss(torch::softmax(logits, 1), labels);
    auto g = torch::autograd::grad({loss}, {logits})[0];
    auto expected = (torch::softmax(logits, 1) - labels) / 6.0;
    CHECK(testing::max_abs(g, expected) < 1e-6);
}

TEST_CASE("perceptual loss: identity, symmetry, pixel MSE and quadratic scaling")
{
    Rng rng = derive_rng(2, 2);
    auto a = randn(rng, {2, 3, 8, 8}, f64);
    auto b = randn(rng, {2, 3, 8, 8}, f64);
    IdentityExtractor id;
    CHECK(std::abs(perceptual_loss(a, a, id).item<double>()) <= 1e-7);
    CHECK(std::abs(perceptual_loss(a, b, id).item<double>() - perceptual_loss(b, a, id).item<double>()) <= 1e-12);
    CHECK(std::abs(perceptual_loss(a, b, id).item<double>() - (a - b).square().mean().item<double>()) <= 1e-6);

    LinearExtractor lin(randn(rng, {4, 3, 1, 1}, f64));
    const double base = perceptual_loss(a, b, lin).item<double>();
    CHECK(base >= 0.0);
    for (double alpha : {1.5, 3.0}) {
        const double scaled = perceptual_loss(b + alpha * (a - b), b, lin).item<double>();
        CHECK(scaled > base);
        CHECK(std::abs(scaled - alpha * alpha * base) <= 1e-9 * (1.0 + scaled));
    }
}

TEST_CASE("perceptual loss through a trunk sums per-layer errors")
{
    torch::manual_seed(3);
    TrunkExtractor fx(ShapesClassifier(3, std::vector<int64_t>{4, 6}));
    fx.to(f64);
    Rng rng = derive_rng(3, 3);
    auto a = randn(rng, {2, 3, 16, 16}, f64);
    auto b = randn(rng, {2, 3, 16, 16}, f64);
    auto la = fx.layers(a), lb = fx.layers(b);
    double expected = 0;
    for (size_t l = 0; l < la.size(); ++l) expected += (la[l] - lb[l]).square().mean().item<double>();
    CHECK(std::abs(perceptual_loss(a, b, fx).item<double>() - expected) <= 1e-12);
    CHECK(fx.pooled(a).size(1) == fx.feature_dim());
    for (const auto& p : fx.classifier()->parameters()) CHECK_FALSE(p.requires_grad());
}

TEST_CASE("adversarial terms")
{
    auto s = torch::tensor({0.3, -1.2, 2.0}, f64);
    CHECK(std::abs(gan_loss_d(s, s).item<double>()) <= 1e-15);
    CHECK(std::abs(gan_loss_g(s).item<double>() + (0.3 - 1.2 + 2.0) / 3.0) <= 1e-15);
    auto ns = gan_loss_g(s, GanVariant::NonSaturating).item<double>();
    double expected = 0;
    for (double v : {0.3, -1.2, 2.0}) expected += std::log1p(std::exp(-v));
    CHECK(std::abs(ns - expected / 3.0) <= 1e-12);
}

TEST_CASE("gradient penalty of a linear critic is closed form")
{
    Rng rng = derive_rng(4, 4);
    auto real = randn(rng, {3, 3, 4, 4}, f64);
    auto fake = randn(rng, {3, 3, 4, 4}, f64);
    auto alpha = rand_uniform(rng, {3}, f64);
    const double n = 48.0;
    // D(x) = sum(x) / n has gradient 1/n everywhere, so ||grad|| = sqrt(n) / n.
    auto critic = [n](const torch::Tensor& x) { return x.flatten(1).sum(1) / n; };
    const double expected = std::pow(std::sqrt(n) / n - 1.0, 2);
    CHECK(std::abs(gradient_penalty(critic, real, fake, alpha).item<double>() - expected) <= 1e-12);
    CHECK_THROWS_AS(gradient_penalty(critic, real, fake.slice(0, 0, 2), alpha), InvalidInput);
}

TEST_CASE("total generator loss")
{
    LossWeights w;
    auto z = torch::zeros({}, f64);
    CHECK(total_generator_loss({z, z, z}, w).item<double>() == 0.0);
    auto one = torch::ones({}, f64);
    CHECK(total_generator_loss({one, one, one}, w).item<double>() == 12.0);
    CHECK(total_generator_loss({one, one, torch::Tensor()}, w).item<double>() == 11.0);
    Rng rng = derive_rng(5, 5);
    for (int i = 0; i < 20; ++i) {
        auto p = randn(rng, {3}, f64);
        LossWeights r{std::abs(p[0].item<double>()), 0.5, 2.0};
        auto parts = GeneratorLossParts{p[0], p[1], p[2]};
        const double oracle = r.perceptual * p[0].item<double>() + r.gan * p[1].item<double>() + r.cls * p[2].item<double>();
        CHECK(std::abs(total_generator_loss(parts, r).item<double>() - oracle) <= 1e-9);
    }
    CHECK_THROWS_AS((LossWeights{-1.0, 1.0, 1.0}.validate()), InvalidInput);
    CHECK_THROWS_AS((LossWeights{0.0, 0.0, 0.0}.validate()), InvalidInput);
}
