#pragma once

#include <vector>

#include <torch/torch.h>

#include "cognet/model/config.hpp"

namespace cognet::model {

constexpr double kLeakySlope = 0.2;

// Multi-scale encoder output; map l has shape [B, channels[l], N / 2^l, N / 2^l].
struct FeaturePyramid {
    std::vector<torch::Tensor> maps;

    size_t size() const { return maps.size(); }
    const torch::Tensor& operator[](size_t l) const { return maps[l]; }
    FeaturePyramid zeros_like() const;
};

// conv3x3 -> lrelu -> conv3x3, plus a 1x1 projection on the skip path when widths differ.
struct ResBlockImpl : torch::nn::Module {
    ResBlockImpl(int64_t in_channels, int64_t out_channels);
    torch::Tensor forward(const torch::Tensor& x);

    torch::nn::Conv2d conv1{nullptr}, conv2{nullptr}, skip{nullptr};
};
TORCH_MODULE(ResBlock);

// L convolutional blocks with 2x average-pool downsampling between consecutive blocks.
struct EncoderImpl : torch::nn::Module {
    EncoderImpl(int64_t in_channels, const ModelConfig& cfg);
    FeaturePyramid forward(const torch::Tensor& x);

    torch::nn::Conv2d stem{nullptr};
    torch::nn::ModuleList blocks;
};
TORCH_MODULE(Encoder);

}  // namespace cognet::model
