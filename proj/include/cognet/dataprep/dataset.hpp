#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include <torch/torch.h>

#include "cognet/dataprep/manifest.hpp"
#include "cognet/dataprep/masking.hpp"

namespace cognet::dataprep {

struct Dataset {
    std::vector<Category> categories;
    std::vector<InpaintingSample> samples;

    int64_t num_classes() const { return static_cast<int64_t>(categories.size()); }
};

// Stacked tensors for a list of samples.
struct Batch {
    torch::Tensor masked;    // [B, 3, H, W]
    torch::Tensor hole;      // [B, 1, H, W]
    torch::Tensor target;    // [B, 3, H, W]
    torch::Tensor category;  // [B] int64
    torch::Tensor one_hot;   // [B, C]

    int64_t size() const { return masked.size(0); }
    Batch to(torch::ScalarType dtype) const;
};

Batch make_batch(const std::vector<InpaintingSample>& samples, std::span<const int64_t> indices);
Batch make_batch(const std::vector<InpaintingSample>& samples);

// Loads every sample from either a manifest directory (manifest.json with
// image and mask files, e.g. ShapesWorld output) or a directory written by
// `prepare_coco` (dataset.json + samples.ndjson).
Dataset load_dataset(const std::filesystem::path& dir, const FilterConfig& filter = {});

struct PrepareReport {
    int64_t images = 0;
    int64_t instances = 0;
    int64_t shards = 0;  // samples written
    std::size_t warnings = 0;
};

// Reads a COCO annotation file, builds object-hole samples and writes them as
// PNG pairs plus an index. With `size`, images are resized to size x size
// (area interpolation for pixels, nearest for masks) before filtering.
PrepareReport prepare_coco(const std::filesystem::path& annotation_file, const std::filesystem::path& image_root,
                           const std::filesystem::path& out_dir, const FilterConfig& filter,
                           std::optional<int64_t> size = std::nullopt);

}  // namespace cognet::dataprep
