#include "cognet/train/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cognet/common/errors.hpp"
#include "cognet/common/rng.hpp"
#include "cognet/losses/feature_extractor.hpp"
#include "cognet/losses/losses.hpp"
#include "cognet/model/cognet.hpp"
#include "cognet/model/discriminator.hpp"

namespace cognet::train {

bool GradCheckReport::passed() const
{
    return std::all_of(groups.begin(), groups.end(), [](const GroupResult& g) { return g.passed(); });
}

nlohmann::json GradCheckReport::to_json() const
{
    nlohmann::json j = nlohmann::json::array();
    for (const auto& g : groups)
        j.push_back({{"group", g.name}, {"max_rel_error", g.max_rel_error}, {"coordinates", g.coordinates},
                     {"tolerance", g.tolerance}, {"skipped", g.skipped}, {"passed", g.passed()}});
    return {{"passed", passed()}, {"groups", j}};
}

namespace {

// Gradients below this norm are indistinguishable from difference noise, which
// grows like roundoff(f) / step (e.g. biases a following normalization cancels).
constexpr double kGradFloor = 1e-6;
constexpr double kRoundoffUlps = 1e3;

}  // namespace

GroupResult check_group(const std::string& name, const std::vector<torch::Tensor>& params,
                        const std::function<torch::Tensor()>& objective, const GradCheckOptions& opts,
                        double tolerance)
{
    GroupResult r;
    r.name = name;
    r.tolerance = tolerance;
    std::vector<torch::Tensor> live;
    for (const auto& p : params)
        if (p.numel() > 0) live.push_back(p);
    if (live.empty()) {
        r.skipped = true;
        return r;
    }
    for (const auto& p : live)
        if (p.scalar_type() != torch::kFloat64) throw InvalidInput("gradient checks need float64 tensors");

    auto value = objective();
    auto analytic = torch::autograd::grad({value}, live, {}, false, false, /*allow_unused=*/true);

    const double noise_floor =
        std::max(kGradFloor, kRoundoffUlps * std::numeric_limits<double>::epsilon() *
                                 std::max(1.0, std::abs(value.item<double>())) / opts.step);

    Rng rng = derive_rng(opts.seed, std::hash<std::string>{}(name));
    // Objectives may differentiate internally (gradient penalty), so only the
    // perturbations themselves run without autograd.
    const auto poke = [](torch::Tensor& flat, int64_t i, double v) {
        torch::NoGradGuard guard;
        flat[i] = v;
    };
    double diff2 = 0, a2 = 0, n2 = 0;
    const auto eval = [&] { return objective().item<double>(); };
    for (size_t t = 0; t < live.size(); ++t) {
        auto flat = live[t].detach().view({-1});
        auto grad = analytic[t].defined() ? analytic[t].reshape({-1}) : torch::zeros_like(flat);
        const int64_t n = flat.numel();
        std::vector<int64_t> coords;
        if (n <= opts.coords_per_tensor) {
            for (int64_t i = 0; i < n; ++i) coords.push_back(i);
        } else {
            std::uniform_int_distribution<int64_t> pick(0, n - 1);
            for (int64_t k = 0; k < opts.coords_per_tensor; ++k) coords.push_back(pick(rng));
        }
        for (int64_t i : coords) {
            const double orig = flat[i].item<double>();
            poke(flat, i, orig + opts.step);
            const double plus = eval();
            poke(flat, i, orig - opts.step);
            const double minus = eval();
            poke(flat, i, orig);
            const double numeric = (plus - minus) / (2.0 * opts.step);
            const double a = grad[i].item<double>();
            diff2 += (a - numeric) * (a - numeric);
            a2 += a * a;
            n2 += numeric * numeric;
        }
        r.coordinates += static_cast<int64_t>(coords.size());
    }
    const double scale = std::max({std::sqrt(a2), std::sqrt(n2), noise_floor});
    r.max_rel_error = std::sqrt(diff2) / scale;
    return r;
}

namespace {

std::vector<torch::Tensor> params_of(torch::nn::Module& m)
{
    return m.parameters();
}

}  // namespace

GradCheckReport grad_check(const model::ModelConfig& micro, const GradCheckOptions& opts)
{
    GradCheckReport report;

    Rng rng = derive_rng(opts.seed, 0x6C);
    const auto f64 = torch::kFloat64;
    const int64_t b = 2, n = micro.image_size, c = micro.num_classes;

    model::CogNet g(micro);
    g->to(f64);

    // Inputs: a centred box hole, random known pixels, a fixed latent.
    auto target = randn(rng, {b, 3, n, n}, f64).tanh();
    auto hole = torch::zeros({b, 1, n, n}, f64);
    hole.slice(2, n / 4, 3 * n / 4).slice(3, n / 4, 3 * n / 4).fill_(1.0);
    auto masked = torch::where((hole > 0.5).expand_as(target), torch::zeros_like(target), target);
    auto z = randn(rng, {b, micro.z_dim}, f64);
    auto proj = randn(rng, {b, 3, n, n}, f64);
    auto labels = torch::one_hot(torch::tensor(std::vector<int64_t>{0, c - 1}), c).to(f64);

    auto generator_objective = [&] {
        auto out = g->forward(masked, hole, z, {model::Mode::Inference});
        return (out.output * proj).sum() + losses::class_loss(out.prediction.probabilities, labels);
    };
    report.groups.push_back(check_group("bottom_up_encoder", params_of(*g->bottom_up), generator_objective, opts));
    report.groups.push_back(check_group("pce", params_of(*g->pce), generator_objective, opts));
    report.groups.push_back(check_group("top_down_encoder", params_of(*g->top_down), generator_objective, opts));
    report.groups.push_back(check_group("mapping", params_of(*g->mapping), generator_objective, opts));

    std::vector<torch::Tensor> adain, decoder;
    for (const auto& p : g->decoder->named_parameters())
        (p.key().find(".adain.") != std::string::npos ? adain : decoder).push_back(p.value());
    report.groups.push_back(check_group("sc_adain", adain, generator_objective, opts));
    report.groups.push_back(check_group("decoder", decoder, generator_objective, opts));

    // SC AdaIN inputs: the decoder map, the style code and the encoder features.
    {
        model::ScAdaIN block(5, 4);
        block->to(f64);
        auto x = randn(rng, {b, 5, 8, 8}, f64).requires_grad_(true);
        auto w = randn(rng, {b, 4}, f64).requires_grad_(true);
        auto f = randn(rng, {b, 5, 8, 8}, f64).requires_grad_(true);
        auto r = randn(rng, {b, 5, 8, 8}, f64);
        report.groups.push_back(check_group("sc_adain_inputs", {x, w, f}, [&] { return (block(x, w, f) * r).sum(); }, opts));
    }

    // Class loss: autograd and finite differences, plus the softmax identity.
    {
        auto logits = randn(rng, {b, c}, f64).requires_grad_(true);
        auto objective = [&] { return losses::class_loss(torch::softmax(logits, 1), labels); };
        auto r = check_group("class_loss", {logits}, objective, opts, 1e-6);
        auto grad = torch::autograd::grad({objective()}, {logits})[0];
        torch::NoGradGuard guard;
        auto identity = (torch::softmax(logits, 1) - labels) / static_cast<double>(b);
        const double err = (grad - identity).abs().max().item<double>();
        GroupResult id{"class_loss_softmax_identity", err, logits.numel(), false, 1e-6};
        report.groups.push_back(r);
        report.groups.push_back(id);
    }

    // Perceptual loss w.r.t. the generated image through a random frozen trunk.
    {
        losses::TrunkExtractor fx(losses::ShapesClassifier(c, std::vector<int64_t>{4, 6}));
        fx.to(f64);
        auto out = randn(rng, {b, 3, n, n}, f64).requires_grad_(true);
        auto tgt = randn(rng, {b, 3, n, n}, f64);
        report.groups.push_back(
            check_group("perceptual_loss", {out}, [&] { return losses::perceptual_loss(out, tgt, fx); }, opts));
    }

    // GAN objectives and the gradient penalty w.r.t. the critic.
    {
        model::Discriminator d(micro);
        d->to(f64);
        auto real = randn(rng, {b, 3, n, n}, f64).tanh();
        auto fake = randn(rng, {b, 3, n, n}, f64).tanh().requires_grad_(true);
        auto alpha = rand_uniform(rng, {b}, f64);
        report.groups.push_back(check_group("gan_loss_d", params_of(*d),
                                            [&] { return losses::gan_loss_d(d(real), d(fake)); }, opts));
        report.groups.push_back(check_group("gan_loss_g", {fake}, [&] { return losses::gan_loss_g(d(fake)); }, opts));
        report.groups.push_back(check_group(
            "gradient_penalty", params_of(*d),
            [&] { return losses::gradient_penalty([&](const torch::Tensor& x) { return d(x); }, real, fake, alpha); },
            opts));
    }
    return report;
}

}  // namespace cognet::train
