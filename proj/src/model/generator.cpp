#include "cognet/model/generator.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "cognet/common/errors.hpp"

namespace cognet::model {

namespace F = torch::nn::functional;

namespace {
torch::Tensor lrelu(const torch::Tensor& x)
{
    return F::leaky_relu(x, F::LeakyReLUFuncOptions().negative_slope(kLeakySlope));
}
}  // namespace

MappingNetworkImpl::MappingNetworkImpl(const ModelConfig& cfg)
{
    fc1 = register_module("fc1", torch::nn::Linear(cfg.z_dim, cfg.mapped_dim));
    fc2 = register_module("fc2", torch::nn::Linear(cfg.mapped_dim, cfg.mapped_dim));
}

torch::Tensor MappingNetworkImpl::forward(const torch::Tensor& z)
{
    // Pixel norm: unit second moment, i.e. radius sqrt(z_dim).
    auto unit = z * torch::rsqrt(z.square().mean(1, true) + 1e-8);
    return lrelu(fc2(lrelu(fc1(unit))));
}

torch::Tensor make_style_code(const torch::Tensor& z, const torch::Tensor& h, MappingNetwork& mapping,
                              const ModelConfig& cfg)
{
    if (z.dim() != 2 || z.size(1) != cfg.z_dim)
        throw InvalidInput(fmt::format("latent code must be [B, {}], got [{}]", cfg.z_dim, fmt::join(z.sizes(), ",")));
    if (h.dim() != 2 || h.size(1) != cfg.h_dim || h.size(0) != z.size(0))
        throw InvalidInput(fmt::format("class embedding must be [{}, {}], got [{}]", z.size(0), cfg.h_dim,
                                       fmt::join(h.sizes(), ",")));
    return torch::cat({mapping(z), h}, 1);
}

DecoderBlockImpl::DecoderBlockImpl(int64_t in_channels, int64_t out_channels, int64_t style_dim, bool up)
    : upsample(up)
{
    conv1 = register_module("conv1", torch::nn::Conv2d(torch::nn::Conv2dOptions(in_channels, out_channels, 3).padding(1)));
    conv2 = register_module("conv2", torch::nn::Conv2d(torch::nn::Conv2dOptions(out_channels, out_channels, 3).padding(1)));
    if (in_channels != out_channels)
        skip = register_module("skip", torch::nn::Conv2d(torch::nn::Conv2dOptions(in_channels, out_channels, 1).bias(false)));
    adain = register_module("adain", ScAdaIN(out_channels, style_dim));
}

torch::Tensor DecoderBlockImpl::forward(const torch::Tensor& x, const torch::Tensor& style, const torch::Tensor& features)
{
    auto in = upsample ? F::interpolate(x, F::InterpolateFuncOptions()
                                               .scale_factor(std::vector<double>{2.0, 2.0})
                                               .mode(torch::kNearest))
                       : x;
    auto h = lrelu(adain(conv1(in), style, features));
    h = conv2(h);
    return lrelu(h + (skip ? skip(in) : in));
}

DecoderImpl::DecoderImpl(const ModelConfig& cfg) : num_scales(cfg.num_scales)
{
    cfg.validate();
    const int64_t coarse = cfg.num_scales - 1;
    const int64_t side = cfg.scale_size(coarse);
    constant = register_parameter("constant", torch::randn({1, cfg.channels[coarse], side, side}));
    blocks = register_module("blocks", torch::nn::ModuleList());
    for (int64_t l = coarse; l >= 0; --l) {
        const int64_t in = l == coarse ? cfg.channels[coarse] : cfg.channels[l + 1];
        blocks->push_back(DecoderBlock(in, cfg.channels[l], cfg.style_dim(), l != coarse));
    }
    to_rgb = register_module("to_rgb", torch::nn::Conv2d(torch::nn::Conv2dOptions(cfg.channels[0], 3, 1)));
}

torch::Tensor DecoderImpl::forward(const FeaturePyramid& bottom_up, const FeaturePyramid& top_down,
                                   const torch::Tensor& style)
{
    if (static_cast<int64_t>(bottom_up.size()) != num_scales || static_cast<int64_t>(top_down.size()) != num_scales)
        throw InvalidInput("decoder: pyramids must have one map per scale");
    const int64_t batch = style.size(0);
    auto x = constant.expand({batch, -1, -1, -1});
    for (int64_t i = 0; i < num_scales; ++i) {
        const auto l = static_cast<size_t>(num_scales - 1 - i);
        x = blocks[static_cast<size_t>(i)]->as<DecoderBlock>()->forward(x, style, bottom_up[l] + top_down[l]);
        if (!torch::isfinite(x).all().item<bool>())
            throw NumericalError(fmt::format("decoder produced non-finite activations at scale {}", l));
    }
    return torch::tanh(to_rgb(x));
}

}  // namespace cognet::model
