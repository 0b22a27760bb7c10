#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "cognet/dataprep/manifest.hpp"

namespace cognet::dataprep {

// Even-odd fill of a polygon given as flat (x0, y0, x1, y1, ...) coordinates.
// A pixel is inside when its center (x + 0.5, y + 0.5) is. Returns uint8 [H, W].
torch::Tensor rasterize_polygon(const std::vector<double>& xy, int64_t height, int64_t width);

// Column-major run lengths starting with a zero run.
torch::Tensor decode_rle(const std::vector<int64_t>& counts, int64_t height, int64_t width);

// The compact string form of run lengths used by COCO tooling.
std::vector<int64_t> parse_rle_string(const std::string& s);

struct CocoReadResult {
    DatasetManifest manifest;
    std::size_t warnings = 0;  // malformed or degenerate records that were skipped
};

// Reads a COCO-style instance annotation file. Category ids are remapped to a
// dense [0, C) range ordered by their original ids. Masks are rasterized into
// memory at image resolution.
CocoReadResult read_coco_manifest(const std::filesystem::path& annotation_file,
                                  const std::filesystem::path& image_root);

}  // namespace cognet::dataprep
