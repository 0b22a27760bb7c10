#include "cognet/model/discriminator.hpp"

#include <cmath>

#include "cognet/model/encoder.hpp"

namespace cognet::model {

namespace F = torch::nn::functional;

namespace {
torch::Tensor lrelu(const torch::Tensor& x)
{
    return F::leaky_relu(x, F::LeakyReLUFuncOptions().negative_slope(kLeakySlope));
}
}  // namespace

DiscBlockImpl::DiscBlockImpl(int64_t in_channels, int64_t out_channels)
{
    conv1 = register_module("conv1", torch::nn::Conv2d(torch::nn::Conv2dOptions(in_channels, in_channels, 3).padding(1)));
    conv2 = register_module("conv2", torch::nn::Conv2d(torch::nn::Conv2dOptions(in_channels, out_channels, 3).padding(1)));
    skip = register_module("skip", torch::nn::Conv2d(torch::nn::Conv2dOptions(in_channels, out_channels, 1).bias(false)));
}

torch::Tensor DiscBlockImpl::forward(const torch::Tensor& x)
{
    auto h = lrelu(conv2(lrelu(conv1(x))));
    h = F::avg_pool2d(h, F::AvgPool2dFuncOptions(2));
    auto s = skip(F::avg_pool2d(x, F::AvgPool2dFuncOptions(2)));
    return (h + s) * (1.0 / std::sqrt(2.0));
}

DiscriminatorImpl::DiscriminatorImpl(const ModelConfig& cfg)
{
    cfg.validate();
    const auto& ch = cfg.disc_channels;
    from_rgb = register_module("from_rgb", torch::nn::Conv2d(torch::nn::Conv2dOptions(3, ch[0], 1)));
    blocks = register_module("blocks", torch::nn::ModuleList());
    for (size_t i = 0; i + 1 < ch.size(); ++i) blocks->push_back(DiscBlock(ch[i], ch[i + 1]));
    const int64_t side = cfg.image_size >> (ch.size() - 1);
    final_conv = register_module("final_conv", torch::nn::Conv2d(torch::nn::Conv2dOptions(ch.back(), ch.back(), 3).padding(1)));
    fc = register_module("fc", torch::nn::Linear(ch.back() * side * side, ch.back()));
    out = register_module("out", torch::nn::Linear(ch.back(), 1));
}

torch::Tensor DiscriminatorImpl::forward(const torch::Tensor& images)
{
    auto h = lrelu(from_rgb(images));
    for (const auto& b : *blocks) h = b->as<DiscBlock>()->forward(h);
    h = lrelu(final_conv(h));
    return out(lrelu(fc(h.flatten(1)))).squeeze(1);
}

}  // namespace cognet::model
