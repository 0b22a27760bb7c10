#pragma once

#include <cstdint>

#include <torch/torch.h>

#include "cognet/common/rng.hpp"
#include "cognet/dataprep/dataset.hpp"
#include "cognet/dataprep/masking.hpp"

namespace cognet::train {

struct Box {
    int64_t top = 0, left = 0, height = 0, width = 0;
};

// Uniform over every placement of a height x width box that keeps `border`
// pixels clear of the image edge.
Box place_box(int64_t box_h, int64_t box_w, int64_t image_h, int64_t image_w, int64_t border, Rng& rng);

// Box with roughly `area` pixels, aspect ratio log-uniform in [1/2, 2], and
// area fraction forced into [filter.min_frac, filter.max_frac].
Box sample_box(double area, int64_t image_h, int64_t image_w, const dataprep::FilterConfig& filter, Rng& rng);

// Replaces every instance hole with a random rectangle of the same area
// (clamped to the filter limits) and re-cuts the masked images. Categories
// are kept.
dataprep::Batch random_box_masks(const dataprep::Batch& batch, Rng& rng, const dataprep::FilterConfig& filter = {});

}  // namespace cognet::train
