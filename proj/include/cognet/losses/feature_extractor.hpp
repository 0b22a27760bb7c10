#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <vector>

#include <torch/torch.h>

#include "cognet/dataprep/masking.hpp"

namespace cognet::losses {

// Fixed image feature function. Implementations never update their own
// parameters; gradients flow through to the input images only.
class FeatureExtractor {
public:
    virtual ~FeatureExtractor() = default;

    // Feature maps of every declared layer for images [B, 3, H, W].
    virtual std::vector<torch::Tensor> layers(const torch::Tensor& images) = 0;

    // Global-average-pooled features of every layer, concatenated: [B, feature_dim()].
    virtual torch::Tensor pooled(const torch::Tensor& images);

    virtual int64_t feature_dim() const = 0;
};

// The single layer is the image itself.
class IdentityExtractor final : public FeatureExtractor {
public:
    std::vector<torch::Tensor> layers(const torch::Tensor& images) override { return {images}; }
    int64_t feature_dim() const override { return 3; }
};

// Small whole-image classifier for ShapesWorld categories. Its convolutional
// trunk, frozen, is the desk-scale backbone of the perceptual loss and of the
// Frechet feature distance.
struct ShapesClassifierImpl : torch::nn::Module {
    ShapesClassifierImpl(int64_t num_classes, std::vector<int64_t> widths = {16, 32, 64});

    std::vector<torch::Tensor> trunk(const torch::Tensor& images);
    torch::Tensor forward(const torch::Tensor& images);  // logits

    int64_t num_classes;
    std::vector<int64_t> widths;
    torch::nn::ModuleList convs;
    torch::nn::Linear head{nullptr};
};
TORCH_MODULE(ShapesClassifier);

class TrunkExtractor final : public FeatureExtractor {
public:
    explicit TrunkExtractor(ShapesClassifier classifier);

    std::vector<torch::Tensor> layers(const torch::Tensor& images) override;
    int64_t feature_dim() const override;

    ShapesClassifier& classifier() { return classifier_; }
    void to(torch::ScalarType dtype);

    void save(const std::filesystem::path& path) const;
    static std::shared_ptr<TrunkExtractor> load(const std::filesystem::path& path);

private:
    ShapesClassifier classifier_;
};

struct ClassifierTrainConfig {
    int64_t steps = 600;
    int64_t batch_size = 32;
    double learning_rate = 1e-3;
    uint64_t seed = 0;
};

// Trains on complete (unmasked) target images with their categories and
// returns the frozen extractor. Returns the training accuracy via `accuracy`.
std::shared_ptr<TrunkExtractor> train_extractor(const std::vector<dataprep::InpaintingSample>& samples,
                                                int64_t num_classes, const ClassifierTrainConfig& cfg,
                                                double* accuracy = nullptr);

}  // namespace cognet::losses
