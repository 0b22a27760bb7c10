#include "cognet/model/encoder.hpp"

#include "cognet/common/errors.hpp"

namespace cognet::model {

namespace F = torch::nn::functional;

FeaturePyramid FeaturePyramid::zeros_like() const
{
    FeaturePyramid z;
    for (const auto& m : maps) z.maps.push_back(torch::zeros_like(m));
    return z;
}

ResBlockImpl::ResBlockImpl(int64_t in_channels, int64_t out_channels)
{
    conv1 = register_module("conv1", torch::nn::Conv2d(torch::nn::Conv2dOptions(in_channels, out_channels, 3).padding(1)));
    conv2 = register_module("conv2", torch::nn::Conv2d(torch::nn::Conv2dOptions(out_channels, out_channels, 3).padding(1)));
    if (in_channels != out_channels)
        skip = register_module("skip", torch::nn::Conv2d(torch::nn::Conv2dOptions(in_channels, out_channels, 1).bias(false)));
}

torch::Tensor ResBlockImpl::forward(const torch::Tensor& x)
{
    auto h = conv2(F::leaky_relu(conv1(x), F::LeakyReLUFuncOptions().negative_slope(kLeakySlope)));
    auto s = skip ? skip(x) : x;
    return F::leaky_relu(h + s, F::LeakyReLUFuncOptions().negative_slope(kLeakySlope));
}

EncoderImpl::EncoderImpl(int64_t in_channels, const ModelConfig& cfg)
{
    cfg.validate();
    stem = register_module("stem", torch::nn::Conv2d(torch::nn::Conv2dOptions(in_channels, cfg.channels[0], 3).padding(1)));
    blocks = register_module("blocks", torch::nn::ModuleList());
    for (int64_t l = 0; l < cfg.num_scales; ++l) {
        const int64_t in = l == 0 ? cfg.channels[0] : cfg.channels[l - 1];
        blocks->push_back(ResBlock(in, cfg.channels[l]));
    }
}

FeaturePyramid EncoderImpl::forward(const torch::Tensor& x)
{
    if (!torch::isfinite(x).all().item<bool>()) throw InvalidInput("encoder input has non-finite values");
    FeaturePyramid out;
    auto h = F::leaky_relu(stem(x), F::LeakyReLUFuncOptions().negative_slope(kLeakySlope));
    for (size_t l = 0; l < blocks->size(); ++l) {
        if (l > 0) h = F::avg_pool2d(h, F::AvgPool2dFuncOptions(2));
        h = blocks[l]->as<ResBlock>()->forward(h);
        out.maps.push_back(h);
    }
    return out;
}

}  // namespace cognet::model
