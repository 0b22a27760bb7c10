#pragma once

#include <cstdint>
#include <filesystem>

#include <torch/torch.h>

namespace cognet {

// RGB image as a [3, H, W] tensor with values in [-1, 1].
struct RgbImage {
    torch::Tensor pixels;

    RgbImage() = default;
    explicit RgbImage(torch::Tensor t);

    int64_t height() const { return pixels.size(1); }
    int64_t width() const { return pixels.size(2); }
};

// Binary [H, W] indicator: 1 inside the hole, 0 in the known region.
struct HoleMask {
    torch::Tensor indicator;

    HoleMask() = default;
    explicit HoleMask(torch::Tensor t);

    int64_t height() const { return indicator.size(0); }
    int64_t width() const { return indicator.size(1); }
    int64_t hole_pixels() const;
    double area_fraction() const;
    // 1 where the pixel is known.
    torch::Tensor known() const { return 1.0 - indicator; }
};

// 8-bit HWC RGB <-> [-1, 1] CHW float.
torch::Tensor u8_to_unit(const torch::Tensor& hwc_u8);
torch::Tensor unit_to_u8(const torch::Tensor& chw);

RgbImage load_rgb(const std::filesystem::path& path);
void save_rgb(const std::filesystem::path& path, const RgbImage& image);
void save_rgb(const std::filesystem::path& path, const torch::Tensor& chw);

// Single-channel PNG, 255 = hole, 0 = known. Values >= 128 read as hole.
HoleMask load_mask(const std::filesystem::path& path);
void save_mask(const std::filesystem::path& path, const HoleMask& mask);

}  // namespace cognet
