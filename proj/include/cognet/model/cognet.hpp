#pragma once

#include <optional>

#include <torch/torch.h>

#include "cognet/model/class_embedding.hpp"
#include "cognet/model/config.hpp"
#include "cognet/model/encoder.hpp"
#include "cognet/model/generator.hpp"

namespace cognet::model {

enum class Mode {
    Train,      // semantic map built from the ground-truth one-hot (teacher forcing)
    Inference,  // semantic map built from the predicted probabilities
};

struct ForwardOptions {
    Mode mode = Mode::Inference;
    bool hard_prediction = false;  // inference only: argmax one-hot instead of soft probabilities
};

struct ForwardOutput {
    torch::Tensor output;     // raw generator image [B, 3, N, N]
    torch::Tensor composite;  // generated inside the hole, input elsewhere
    ClassPrediction prediction;
    torch::Tensor semantic_map;  // [B, C, N, N]
    FeaturePyramid bottom_up;
    FeaturePyramid top_down;
    torch::Tensor style;
};

// Generated pixels inside the hole, `input` elsewhere. hole is [B, 1, H, W] (or [H, W] with 3-D images).
torch::Tensor composite(const torch::Tensor& generated, const torch::Tensor& input, const torch::Tensor& hole);

// Two-stream contextual object generator.
struct CogNetImpl : torch::nn::Module {
    explicit CogNetImpl(const ModelConfig& cfg);

    // Input of the bottom-up stream is the 4-channel concat of masked image and hole.
    FeaturePyramid encode_bottom_up(const torch::Tensor& masked, const torch::Tensor& hole);

    // `one_hot` is required in Mode::Train.
    ForwardOutput forward(const torch::Tensor& masked, const torch::Tensor& hole, const torch::Tensor& z,
                          const ForwardOptions& opts = {}, const std::optional<torch::Tensor>& one_hot = std::nullopt);

    ModelConfig config;
    Encoder bottom_up{nullptr};
    ClassEmbedding pce{nullptr};
    Encoder top_down{nullptr};
    MappingNetwork mapping{nullptr};
    Decoder decoder{nullptr};
};
TORCH_MODULE(CogNet);

}  // namespace cognet::model
