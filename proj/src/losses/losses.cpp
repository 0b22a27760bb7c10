#include "cognet/losses/losses.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "cognet/common/errors.hpp"

namespace cognet::losses {

namespace F = torch::nn::functional;

void LossWeights::validate() const
{
    if (perceptual < 0 || gan < 0 || cls < 0) throw InvalidInput("loss weights must be nonnegative");
    if (perceptual == 0 && gan == 0 && cls == 0) throw InvalidInput("at least one loss weight must be positive");
}

torch::Tensor class_loss(const torch::Tensor& probabilities, const torch::Tensor& one_hot)
{
    if (probabilities.sizes() != one_hot.sizes())
        throw InvalidInput(fmt::format("class_loss: probabilities [{}] vs labels [{}]",
                                       fmt::join(probabilities.sizes(), ","), fmt::join(one_hot.sizes(), ",")));
    auto p = probabilities.dim() == 1 ? probabilities.unsqueeze(0) : probabilities;
    auto t = one_hot.dim() == 1 ? one_hot.unsqueeze(0) : one_hot;
    return (-t.to(p.dtype()) * torch::log(p.clamp_min(kProbFloor))).sum(1).mean();
}

torch::Tensor perceptual_loss(const torch::Tensor& output, const torch::Tensor& target, FeatureExtractor& fx)
{
    if (output.sizes() != target.sizes()) throw InvalidInput("perceptual_loss: shape mismatch");
    const auto a = fx.layers(output);
    const auto b = fx.layers(target);
    auto total = torch::zeros({}, output.options());
    for (size_t l = 0; l < a.size(); ++l) total = total + (a[l] - b[l]).square().mean();
    return total;
}

torch::Tensor gan_loss_g(const torch::Tensor& fake_scores, GanVariant variant)
{
    if (variant == GanVariant::Wasserstein) return -fake_scores.mean();
    return F::softplus(-fake_scores).mean();
}

torch::Tensor gan_loss_d(const torch::Tensor& real_scores, const torch::Tensor& fake_scores, GanVariant variant)
{
    if (variant == GanVariant::Wasserstein) return fake_scores.mean() - real_scores.mean();
    return F::softplus(fake_scores).mean() + F::softplus(-real_scores).mean();
}

torch::Tensor gradient_penalty(const std::function<torch::Tensor(const torch::Tensor&)>& critic,
                               const torch::Tensor& real, const torch::Tensor& fake, const torch::Tensor& alpha)
{
    if (real.sizes() != fake.sizes()) throw InvalidInput("gradient_penalty: real and fake differ in shape");
    auto a = alpha.to(real.dtype()).view({-1, 1, 1, 1});
    auto mixed = (a * real.detach() + (1.0 - a) * fake.detach()).requires_grad_(true);
    auto scores = critic(mixed);
    auto grad = torch::autograd::grad({scores.sum()}, {mixed}, {}, /*retain_graph=*/true, /*create_graph=*/true)[0];
    auto norm = grad.flatten(1).norm(2, 1);
    return (norm - 1.0).square().mean();
}

torch::Tensor total_generator_loss(const GeneratorLossParts& parts, const LossWeights& weights)
{
    auto total = weights.perceptual * parts.perceptual + weights.gan * parts.gan;
    if (parts.cls.defined()) total = total + weights.cls * parts.cls;
    return total;
}

}  // namespace cognet::losses
