#include "cognet/common/image.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "cognet/common/errors.hpp"

namespace cognet {

RgbImage::RgbImage(torch::Tensor t) : pixels(std::move(t))
{
    if (pixels.dim() != 3 || pixels.size(0) != 3)
        throw InvalidInput(fmt::format("RgbImage expects [3, H, W], got {}", fmt::join(pixels.sizes(), "x")));
    if (!torch::isfinite(pixels).all().item<bool>()) throw InvalidInput("RgbImage has non-finite pixels");
}

HoleMask::HoleMask(torch::Tensor t) : indicator(std::move(t))
{
    if (indicator.dim() != 2) throw InvalidInput("HoleMask expects [H, W]");
    if (!((indicator == 0) | (indicator == 1)).all().item<bool>())
        throw InvalidInput("HoleMask values must be 0 or 1");
}

int64_t HoleMask::hole_pixels() const
{
    return static_cast<int64_t>(indicator.sum().item<double>());
}

double HoleMask::area_fraction() const
{
    return static_cast<double>(hole_pixels()) / static_cast<double>(indicator.numel());
}

torch::Tensor u8_to_unit(const torch::Tensor& hwc_u8)
{
    return hwc_u8.permute({2, 0, 1}).to(torch::kFloat32).div(127.5).sub(1.0).contiguous();
}

torch::Tensor unit_to_u8(const torch::Tensor& chw)
{
    return chw.detach().to(torch::kFloat64).clamp(-1.0, 1.0).add(1.0).mul(127.5).round()
        .to(torch::kUInt8).permute({1, 2, 0}).contiguous();
}

RgbImage load_rgb(const std::filesystem::path& path)
{
    cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
    if (bgr.empty()) throw IoError(fmt::format("cannot read image {}", path.string()));
    cv::Mat rgb;
    cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
    auto t = torch::from_blob(rgb.data, {rgb.rows, rgb.cols, 3}, torch::kUInt8).clone();
    return RgbImage(u8_to_unit(t));
}

void save_rgb(const std::filesystem::path& path, const torch::Tensor& chw)
{
    auto u8 = unit_to_u8(chw);
    cv::Mat rgb(static_cast<int>(u8.size(0)), static_cast<int>(u8.size(1)), CV_8UC3, u8.data_ptr<uint8_t>());
    cv::Mat bgr;
    cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
    if (!cv::imwrite(path.string(), bgr)) throw IoError(fmt::format("cannot write image {}", path.string()));
}

void save_rgb(const std::filesystem::path& path, const RgbImage& image)
{
    save_rgb(path, image.pixels);
}

HoleMask load_mask(const std::filesystem::path& path)
{
    cv::Mat gray = cv::imread(path.string(), cv::IMREAD_GRAYSCALE);
    if (gray.empty()) throw IoError(fmt::format("cannot read mask {}", path.string()));
    auto t = torch::from_blob(gray.data, {gray.rows, gray.cols}, torch::kUInt8);
    return HoleMask((t >= 128).to(torch::kFloat32));
}

void save_mask(const std::filesystem::path& path, const HoleMask& mask)
{
    auto u8 = (mask.indicator.detach() > 0.5).to(torch::kUInt8).mul(255).contiguous();
    cv::Mat gray(static_cast<int>(u8.size(0)), static_cast<int>(u8.size(1)), CV_8UC1, u8.data_ptr<uint8_t>());
    if (!cv::imwrite(path.string(), gray)) throw IoError(fmt::format("cannot write mask {}", path.string()));
}

}  // namespace cognet
