#pragma once

#include <functional>

#include <torch/torch.h>

#include "cognet/losses/feature_extractor.hpp"

namespace cognet::losses {

constexpr double kProbFloor = 1e-12;

struct LossWeights {
    double perceptual = 10.0;
    double gan = 1.0;
    double cls = 1.0;

    void validate() const;
};

enum class GanVariant {
    Wasserstein,    // critic with gradient penalty
    NonSaturating,  // logistic loss, for comparison
};

// sum_i -t_i log(max(p_i, 1e-12)), averaged over the batch. Accepts [C] or [B, C].
torch::Tensor class_loss(const torch::Tensor& probabilities, const torch::Tensor& one_hot);

// Sum over extractor layers of the mean squared feature difference.
torch::Tensor perceptual_loss(const torch::Tensor& output, const torch::Tensor& target, FeatureExtractor& fx);

torch::Tensor gan_loss_g(const torch::Tensor& fake_scores, GanVariant variant = GanVariant::Wasserstein);

// Critic objective to minimize: mean(fake) - mean(real) for the Wasserstein variant.
torch::Tensor gan_loss_d(const torch::Tensor& real_scores, const torch::Tensor& fake_scores,
                         GanVariant variant = GanVariant::Wasserstein);

// mean over the batch of (||grad_x D(x~)||_2 - 1)^2 at x~ = alpha * real + (1 - alpha) * fake,
// with alpha [B] supplied by the caller. Differentiable w.r.t. the critic's parameters.
torch::Tensor gradient_penalty(const std::function<torch::Tensor(const torch::Tensor&)>& critic,
                               const torch::Tensor& real, const torch::Tensor& fake, const torch::Tensor& alpha);

struct GeneratorLossParts {
    torch::Tensor perceptual;
    torch::Tensor gan;
    torch::Tensor cls;  // undefined when the class embedding is disabled
};

torch::Tensor total_generator_loss(const GeneratorLossParts& parts, const LossWeights& weights);

}  // namespace cognet::losses
