#include "cognet/model/cognet.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "cognet/common/errors.hpp"

namespace cognet::model {

torch::Tensor composite(const torch::Tensor& generated, const torch::Tensor& input, const torch::Tensor& hole)
{
    if (generated.sizes() != input.sizes())
        throw InvalidInput(fmt::format("composite: generated [{}] vs input [{}]", fmt::join(generated.sizes(), ","),
                                       fmt::join(input.sizes(), ",")));
    auto inside = (hole > 0.5);
    if (generated.dim() == 3 && hole.dim() == 2) inside = inside.unsqueeze(0);
    return torch::where(inside.expand_as(generated), generated, input);
}

CogNetImpl::CogNetImpl(const ModelConfig& cfg) : config(cfg)
{
    cfg.validate();
    bottom_up = register_module("bottom_up", Encoder(4, cfg));
    pce = register_module("pce", ClassEmbedding(cfg));
    top_down = register_module("top_down", Encoder(cfg.num_classes, cfg));
    mapping = register_module("mapping", MappingNetwork(cfg));
    decoder = register_module("decoder", Decoder(cfg));
}

FeaturePyramid CogNetImpl::encode_bottom_up(const torch::Tensor& masked, const torch::Tensor& hole)
{
    const int64_t n = config.image_size;
    if (masked.dim() != 4 || masked.size(1) != 3 || masked.size(2) != n || masked.size(3) != n)
        throw InvalidInput(fmt::format("expected masked images [B, 3, {}, {}], got [{}]", n, n, fmt::join(masked.sizes(), ",")));
    if (hole.dim() != 4 || hole.size(1) != 1 || hole.size(0) != masked.size(0) || hole.size(2) != n || hole.size(3) != n)
        throw InvalidInput(fmt::format("expected holes [B, 1, {}, {}], got [{}]", n, n, fmt::join(hole.sizes(), ",")));
    return bottom_up(torch::cat({masked, hole}, 1));
}

ForwardOutput CogNetImpl::forward(const torch::Tensor& masked, const torch::Tensor& hole, const torch::Tensor& z,
                                  const ForwardOptions& opts, const std::optional<torch::Tensor>& one_hot)
{
    ForwardOutput out;
    out.bottom_up = encode_bottom_up(masked, hole);
    out.prediction = pce(out.bottom_up.maps.back());
    auto h = config.use_pce ? out.prediction.embedding : torch::zeros_like(out.prediction.embedding);

    torch::Tensor classes;
    if (opts.mode == Mode::Train) {
        if (!one_hot) throw InvalidInput("training forward pass needs the ground-truth one-hot labels");
        classes = one_hot->to(masked.dtype());
    } else {
        classes = opts.hard_prediction ? harden(out.prediction.probabilities) : out.prediction.probabilities;
    }
    out.semantic_map = make_semantic_map(classes, hole);
    out.top_down = config.use_top_down ? top_down(out.semantic_map) : out.bottom_up.zeros_like();

    out.style = make_style_code(z, h, mapping, config);
    out.output = decoder(out.bottom_up, out.top_down, out.style);
    out.composite = composite(out.output, masked, hole);
    return out;
}

}  // namespace cognet::model
