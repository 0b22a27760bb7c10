#include "cognet/model/class_embedding.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "cognet/common/errors.hpp"

namespace cognet::model {

ClassEmbeddingImpl::ClassEmbeddingImpl(const ModelConfig& cfg)
{
    const int64_t side = cfg.scale_size(cfg.num_scales - 1);
    const int64_t flat = cfg.channels.back() * side * side;
    project = register_module("project", torch::nn::Linear(flat, cfg.h_dim));
    classifier = register_module("classifier", torch::nn::Linear(cfg.h_dim, cfg.num_classes));
}

ClassPrediction ClassEmbeddingImpl::forward(const torch::Tensor& deepest)
{
    ClassPrediction p;
    p.embedding = project(deepest.flatten(1));
    p.logits = classifier(p.embedding);
    p.probabilities = torch::softmax(p.logits, 1);
    return p;
}

torch::Tensor make_semantic_map(const torch::Tensor& probabilities, const torch::Tensor& hole)
{
    if (probabilities.dim() != 2 || hole.dim() != 4 || hole.size(1) != 1 || probabilities.size(0) != hole.size(0))
        throw InvalidInput(fmt::format("make_semantic_map: probabilities [{}] and hole [{}] do not match",
                                       fmt::join(probabilities.sizes(), ","), fmt::join(hole.sizes(), ",")));
    return probabilities.unsqueeze(-1).unsqueeze(-1) * hole;
}

torch::Tensor harden(const torch::Tensor& probabilities)
{
    return torch::one_hot(probabilities.argmax(1), probabilities.size(1)).to(probabilities.dtype());
}

}  // namespace cognet::model
