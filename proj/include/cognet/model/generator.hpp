#pragma once

#include <torch/torch.h>

#include "cognet/model/config.hpp"
#include "cognet/model/encoder.hpp"
#include "cognet/model/sc_adain.hpp"

namespace cognet::model {

// z is rescaled to the hypersphere of radius sqrt(z_dim), then two fully connected layers.
struct MappingNetworkImpl : torch::nn::Module {
    explicit MappingNetworkImpl(const ModelConfig& cfg);
    torch::Tensor forward(const torch::Tensor& z);

    torch::nn::Linear fc1{nullptr}, fc2{nullptr};
};
TORCH_MODULE(MappingNetwork);

// w = concat(mapping(z), h). Throws InvalidInput on dimension mismatch.
torch::Tensor make_style_code(const torch::Tensor& z, const torch::Tensor& h, MappingNetwork& mapping,
                              const ModelConfig& cfg);

// upsample (except at the coarsest scale) -> conv -> SC AdaIN -> lrelu -> conv, residual.
struct DecoderBlockImpl : torch::nn::Module {
    DecoderBlockImpl(int64_t in_channels, int64_t out_channels, int64_t style_dim, bool upsample);
    torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& style, const torch::Tensor& features);

    bool upsample;
    torch::nn::Conv2d conv1{nullptr}, conv2{nullptr}, skip{nullptr};
    ScAdaIN adain{nullptr};
};
TORCH_MODULE(DecoderBlock);

// Shared generator of both streams. Starts from a learned constant at the
// coarsest scale and applies one SC AdaIN per scale, coarse to fine; the
// position-wise parameters at scale l come from f^{b,l} + f^{t,l}.
struct DecoderImpl : torch::nn::Module {
    explicit DecoderImpl(const ModelConfig& cfg);

    // Output in [-1, 1]. Throws NumericalError naming the scale that went non-finite.
    torch::Tensor forward(const FeaturePyramid& bottom_up, const FeaturePyramid& top_down, const torch::Tensor& style);

    int64_t num_scales;
    torch::Tensor constant;
    torch::nn::ModuleList blocks;  // blocks[0] runs at the coarsest scale
    torch::nn::Conv2d to_rgb{nullptr};
};
TORCH_MODULE(Decoder);

}  // namespace cognet::model
