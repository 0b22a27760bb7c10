#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>

#include <torch/torch.h>

#include "cognet/dataprep/manifest.hpp"

namespace cognet::dataprep {

// Procedural toy dataset: one shape per image over a textured background.
// The background texture family agrees with the object category with
// probability `rho` and is drawn uniformly otherwise, so rho = 1 makes the
// background alone sufficient to recognize the missing object.
struct ShapesWorldConfig {
    int64_t canvas = 64;
    int64_t num_classes = 4;  // circle, square, triangle, star, diamond, cross (first C are used)
    double rho = 1.0;
    double min_radius_frac = 0.18;  // object radius as a fraction of the canvas
    double max_radius_frac = 0.30;
    int64_t min_period = 6;  // background texture period in pixels
    int64_t max_period = 12;
    uint64_t seed = 0;
    std::string split = "train";

    static constexpr int64_t kMaxClasses = 6;

    void validate() const;
    nlohmann::json to_json() const;
};

enum class BackgroundFamily : int64_t {
    HorizontalStripes = 0,
    VerticalStripes = 1,
    Checkerboard = 2,
    Dots = 3,
    DiagonalStripes = 4,
    Rings = 5,
};

const std::array<const char*, ShapesWorldConfig::kMaxClasses>& shape_names();

struct ShapesWorldItem {
    torch::Tensor image;  // uint8 [H, W, 3]
    torch::Tensor mask;   // uint8 [H, W], 1 = object
    int64_t category = 0;
    BackgroundFamily family = BackgroundFamily::HorizontalStripes;
    nlohmann::json descriptor;  // background parameters
};

// Deterministic in (cfg, index); items can be rendered in any order.
ShapesWorldItem render_shapesworld(const ShapesWorldConfig& cfg, int64_t index);

// Writes images/NNNNNN.png, masks/NNNNNN.png and manifest.json under `out`.
DatasetManifest generate_shapesworld(const ShapesWorldConfig& cfg, int64_t n, const std::filesystem::path& out);

}  // namespace cognet::dataprep
