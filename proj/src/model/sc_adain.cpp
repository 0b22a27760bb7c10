#include "cognet/model/sc_adain.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "cognet/common/errors.hpp"

namespace cognet::model {

torch::Tensor channel_normalize(const torch::Tensor& x, double eps)
{
    auto mean = x.mean({2, 3}, true);
    auto var = (x - mean).square().mean({2, 3}, true);
    return (x - mean) / torch::sqrt(var + eps);
}

torch::Tensor position_normalize(const torch::Tensor& x, double eps)
{
    auto mean = x.mean(1, true);
    auto var = (x - mean).square().mean(1, true);
    return (x - mean) / torch::sqrt(var + eps);
}

torch::Tensor channel_modulate(const torch::Tensor& x, const torch::Tensor& gamma, const torch::Tensor& beta,
                               double eps)
{
    return channel_normalize(x, eps) * gamma.unsqueeze(-1).unsqueeze(-1) + beta.unsqueeze(-1).unsqueeze(-1);
}

torch::Tensor sc_adain(const torch::Tensor& x, const torch::Tensor& channel_gamma, const torch::Tensor& channel_beta,
                       const torch::Tensor& spatial_gamma, const torch::Tensor& spatial_beta, double eps)
{
    if (x.dim() != 4) throw InvalidInput("sc_adain expects [B, C, H, W]");
    if (spatial_gamma.sizes() != x.sizes() || spatial_beta.sizes() != x.sizes())
        throw InvalidInput(fmt::format("sc_adain: spatial parameters [{}] do not match input [{}]",
                                       fmt::join(spatial_gamma.sizes(), ","), fmt::join(x.sizes(), ",")));
    auto bar = channel_modulate(x, channel_gamma, channel_beta, eps);
    return position_normalize(bar, eps) * spatial_gamma + spatial_beta;
}

ScAdaINImpl::ScAdaINImpl(int64_t channels, int64_t style_dim)
{
    channel_gamma = register_module("channel_gamma", torch::nn::Linear(style_dim, channels));
    channel_beta = register_module("channel_beta", torch::nn::Linear(style_dim, channels));
    spatial_gamma = register_module("spatial_gamma",
                                    torch::nn::Conv2d(torch::nn::Conv2dOptions(channels, channels, 3).padding(1)));
    spatial_beta = register_module("spatial_beta",
                                   torch::nn::Conv2d(torch::nn::Conv2dOptions(channels, channels, 3).padding(1)));
    // Start near the identity affine.
    torch::NoGradGuard guard;
    channel_gamma->bias.fill_(1.0);
    channel_beta->bias.zero_();
    spatial_gamma->bias.fill_(1.0);
    spatial_beta->bias.zero_();
}

torch::Tensor ScAdaINImpl::forward(const torch::Tensor& x, const torch::Tensor& style, const torch::Tensor& features)
{
    if (features.sizes() != x.sizes())
        throw InvalidInput(fmt::format("SC AdaIN: encoder features [{}] do not match decoder map [{}]",
                                       fmt::join(features.sizes(), ","), fmt::join(x.sizes(), ",")));
    return sc_adain(x, channel_gamma(style), channel_beta(style), spatial_gamma(features), spatial_beta(features));
}

}  // namespace cognet::model
