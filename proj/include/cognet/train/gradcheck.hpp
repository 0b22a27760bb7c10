#pragma once

#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "cognet/model/config.hpp"

namespace cognet::train {

struct GroupResult {
    std::string name;
    double max_rel_error = 0.0;  // ||analytic - numeric|| / max(||analytic||, ||numeric||, noise floor) over the sampled coordinates of the group
    int64_t coordinates = 0;     // perturbed coordinates
    bool skipped = false;        // group without parameters
    double tolerance = 1e-3;
    bool passed() const { return skipped || max_rel_error < tolerance; }
};

struct GradCheckReport {
    std::vector<GroupResult> groups;
    bool passed() const;
    nlohmann::json to_json() const;
};

struct GradCheckOptions {
    double step = 1e-6;  // small enough to rarely straddle a leaky-ReLU kink
    int64_t coords_per_tensor = 12;
    uint64_t seed = 0;
};

// Central finite differences of `objective` against its autograd gradient for
// a sample of coordinates of every tensor in `params`. Tensors must be float64
// leaves that require grad.
GroupResult check_group(const std::string& name, const std::vector<torch::Tensor>& params,
                        const std::function<torch::Tensor()>& objective, const GradCheckOptions& opts = {},
                        double tolerance = 1e-3);

// Every parameter group of the generator (encoders, class embedding, mapping,
// SC AdaIN heads, decoder convs), the critic under the GAN objectives and the
// gradient penalty, the perceptual loss w.r.t. its input, and the class loss
// w.r.t. the logits (which must equal softmax(logits) - t within 1e-6).
GradCheckReport grad_check(const model::ModelConfig& micro = model::ModelConfig::micro(),
                           const GradCheckOptions& opts = {});

}  // namespace cognet::train
