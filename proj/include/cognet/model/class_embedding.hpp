#pragma once

#include <torch/torch.h>

#include "cognet/model/config.hpp"

namespace cognet::model {

struct ClassPrediction {
    torch::Tensor embedding;      // h, [B, h_dim]
    torch::Tensor logits;         // W^c h + b, [B, C]
    torch::Tensor probabilities;  // softmax(logits), [B, C]
};

// Predictive class embedding: the deepest bottom-up feature map is flattened
// and projected to the embedding h, and a linear classifier on h predicts the
// category of the missing object.
struct ClassEmbeddingImpl : torch::nn::Module {
    explicit ClassEmbeddingImpl(const ModelConfig& cfg);
    ClassPrediction forward(const torch::Tensor& deepest);

    torch::nn::Linear project{nullptr};
    torch::nn::Linear classifier{nullptr};
};
TORCH_MODULE(ClassEmbedding);

// y_i = t_i * hole for every class i. `probabilities` is [B, C], `hole` [B, 1, H, W].
torch::Tensor make_semantic_map(const torch::Tensor& probabilities, const torch::Tensor& hole);

// One-hot at the argmax of each row.
torch::Tensor harden(const torch::Tensor& probabilities);

}  // namespace cognet::model
