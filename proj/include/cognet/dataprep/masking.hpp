#pragma once

#include <cstdint>
#include <vector>

#include <torch/torch.h>

#include "cognet/common/image.hpp"

namespace cognet::dataprep {

struct FilterConfig {
    double min_frac = 0.02;
    double max_frac = 0.5;
    int64_t border = 1;  // required gap between the instance bounding box and the image edge
};

struct InstanceAnnotation {
    HoleMask mask;
    int64_t category_id = 0;
};

// One training/inference unit built by hiding one object instance.
struct InpaintingSample {
    RgbImage masked_image;
    HoleMask hole;
    RgbImage target;
    int64_t category = 0;
    torch::Tensor one_hot;  // [C]
};

// Inclusive pixel bounds of the nonzero region.
struct BoundingBox {
    int64_t top = 0, left = 0, bottom = -1, right = -1;
    bool empty() const { return bottom < top || right < left; }
};

BoundingBox bounding_box(const HoleMask& mask);

// Known pixels are copied, hole pixels are set to 0 (the mid-gray of [-1, 1]).
RgbImage cut_hole(const RgbImage& target, const HoleMask& hole);

bool filter_instance(const InstanceAnnotation& ann, const FilterConfig& cfg);

torch::Tensor one_hot(int64_t category, int64_t num_classes);

InpaintingSample make_sample(const RgbImage& target, const InstanceAnnotation& ann, int64_t num_classes);

// One sample per annotation that passes `filter_instance`.
std::vector<InpaintingSample> make_samples(const RgbImage& target,
                                           const std::vector<InstanceAnnotation>& annotations,
                                           const FilterConfig& cfg, int64_t num_classes);

// Throws InvalidInput when any InpaintingSample invariant is violated.
void validate_sample(const InpaintingSample& sample, int64_t num_classes);

}  // namespace cognet::dataprep
