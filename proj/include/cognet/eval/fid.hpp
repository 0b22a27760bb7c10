#pragma once

#include <cstdint>

#include <Eigen/Dense>
#include <torch/torch.h>

#include "cognet/losses/feature_extractor.hpp"

namespace cognet::eval {

struct FeatureStats {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;  // unbiased (n - 1) sample covariance
    int64_t count = 0;

    int64_t dim() const { return mean.size(); }
    // Throws InvalidInput unless symmetric within 1e-9, n >= 2 and PSD up to -1e-8.
    void validate() const;
};

// Mean and covariance of rows of `features` [n, d], accumulated in double
// precision with compensated summation.
FeatureStats compute_stats(const torch::Tensor& features);

// Pooled extractor features of `images` [n, 3, H, W], processed in chunks.
torch::Tensor extract_features(const torch::Tensor& images, losses::FeatureExtractor& fx, int64_t chunk = 64);

FeatureStats extract_stats(const torch::Tensor& images, losses::FeatureExtractor& fx, int64_t chunk = 64);

// ||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a S_b)^{1/2}); the trace of the
// square root is taken from the eigenvalues of the symmetric S_a^{1/2} S_b S_a^{1/2}
// with negative eigenvalues clamped to zero. Falls back to adding 1e-6 I to
// both covariances (and sets *regularized) when the eigensolver fails.
double frechet_distance(const FeatureStats& a, const FeatureStats& b, bool* regularized = nullptr);

// Per-pair perceptual distance: for every extractor layer, features are unit
// normalized along channels at each position, the squared difference is
// summed over channels and averaged over positions; layers are averaged.
torch::Tensor lpips_proxy_per_pair(const torch::Tensor& a, const torch::Tensor& b, losses::FeatureExtractor& fx);

// Mean of lpips_proxy_per_pair.
double lpips_proxy(const torch::Tensor& a, const torch::Tensor& b, losses::FeatureExtractor& fx);

}  // namespace cognet::eval
