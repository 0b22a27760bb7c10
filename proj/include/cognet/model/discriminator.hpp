#pragma once

#include <torch/torch.h>

#include "cognet/model/config.hpp"

namespace cognet::model {

// Residual downsampling block: two 3x3 convs then 2x average pooling, with a
// pooled 1x1 skip; the sum is scaled by 1/sqrt(2).
struct DiscBlockImpl : torch::nn::Module {
    DiscBlockImpl(int64_t in_channels, int64_t out_channels);
    torch::Tensor forward(const torch::Tensor& x);

    torch::nn::Conv2d conv1{nullptr}, conv2{nullptr}, skip{nullptr};
};
TORCH_MODULE(DiscBlock);

// Residual critic in the style of StyleGAN2: RGB in, one realness score per image out.
struct DiscriminatorImpl : torch::nn::Module {
    explicit DiscriminatorImpl(const ModelConfig& cfg);
    torch::Tensor forward(const torch::Tensor& images);  // [B, 3, N, N] -> [B]

    torch::nn::Conv2d from_rgb{nullptr};
    torch::nn::ModuleList blocks;
    torch::nn::Conv2d final_conv{nullptr};
    torch::nn::Linear fc{nullptr}, out{nullptr};
};
TORCH_MODULE(Discriminator);

}  // namespace cognet::model
