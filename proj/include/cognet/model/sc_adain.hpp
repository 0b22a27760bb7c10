#pragma once

#include <torch/torch.h>

namespace cognet::model {

constexpr double kNormEps = 1e-8;

// (X - mean over H, W) / sqrt(var over H, W + eps), per sample and channel.
torch::Tensor channel_normalize(const torch::Tensor& x, double eps = kNormEps);

// (X - mean over C) / sqrt(var over C + eps), per sample and position.
torch::Tensor position_normalize(const torch::Tensor& x, double eps = kNormEps);

// Two-step spatial-channel adaptive instance normalization of x [B, C, H, W]:
//   step 1: channel_normalize(x) * channel_gamma + channel_beta   (gamma/beta [B, C])
//   step 2: position_normalize(step 1) * spatial_gamma + spatial_beta   (gamma/beta [B, C, H, W])
// Variances are population variances.
torch::Tensor sc_adain(const torch::Tensor& x, const torch::Tensor& channel_gamma, const torch::Tensor& channel_beta,
                       const torch::Tensor& spatial_gamma, const torch::Tensor& spatial_beta, double eps = kNormEps);

// Step 1 only.
torch::Tensor channel_modulate(const torch::Tensor& x, const torch::Tensor& gamma, const torch::Tensor& beta,
                               double eps = kNormEps);

// Modulation heads of one decoder scale. Channel-wise parameters come from the
// style code w; position-wise parameters from the sum of the bottom-up and
// top-down encoder maps at the same scale.
struct ScAdaINImpl : torch::nn::Module {
    ScAdaINImpl(int64_t channels, int64_t style_dim);

    torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& style, const torch::Tensor& features);

    torch::nn::Linear channel_gamma{nullptr}, channel_beta{nullptr};
    torch::nn::Conv2d spatial_gamma{nullptr}, spatial_beta{nullptr};
};
TORCH_MODULE(ScAdaIN);

}  // namespace cognet::model
