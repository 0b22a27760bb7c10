#include "cognet/train/box_masks.hpp"

#include <cmath>

#include "cognet/common/errors.hpp"

namespace cognet::train {

Box place_box(int64_t box_h, int64_t box_w, int64_t image_h, int64_t image_w, int64_t border, Rng& rng)
{
    const int64_t max_top = image_h - border - box_h;
    const int64_t max_left = image_w - border - box_w;
    if (box_h < 1 || box_w < 1 || max_top < border || max_left < border)
        throw InvalidInput("box does not fit inside the image");
    Box b{0, 0, box_h, box_w};
    b.top = std::uniform_int_distribution<int64_t>(border, max_top)(rng);
    b.left = std::uniform_int_distribution<int64_t>(border, max_left)(rng);
    return b;
}

Box sample_box(double area, int64_t image_h, int64_t image_w, const dataprep::FilterConfig& filter, Rng& rng)
{
    const double total = static_cast<double>(image_h * image_w);
    const double min_area = std::ceil(filter.min_frac * total);
    const double max_area = std::floor(filter.max_frac * total);
    area = std::clamp(area, min_area, max_area);
    const int64_t max_h = image_h - 2 * filter.border;
    const int64_t max_w = image_w - 2 * filter.border;

    std::uniform_real_distribution<double> log_aspect(std::log(0.5), std::log(2.0));
    const double aspect = std::exp(log_aspect(rng));
    auto h = std::clamp<int64_t>(std::llround(std::sqrt(area * aspect)), 1, max_h);
    auto w = std::clamp<int64_t>(std::llround(area / static_cast<double>(h)), 1, max_w);
    // Rounding may leave the area outside the limits; fix the width first, then the height.
    const auto lo = [&](int64_t side) { return static_cast<int64_t>(std::ceil(min_area / static_cast<double>(side))); };
    const auto hi = [&](int64_t side) { return static_cast<int64_t>(std::floor(max_area / static_cast<double>(side))); };
    w = std::clamp(w, lo(h), std::max(lo(h), hi(h)));
    if (w > max_w) {
        w = max_w;
        h = std::clamp(h, lo(w), std::min(max_h, std::max(lo(w), hi(w))));
    }
    if (h * w < min_area || h * w > max_area) throw InvalidInput("cannot fit a box with the requested area");
    return place_box(h, w, image_h, image_w, filter.border, rng);
}

dataprep::Batch random_box_masks(const dataprep::Batch& batch, Rng& rng, const dataprep::FilterConfig& filter)
{
    dataprep::Batch out = batch;
    const int64_t n = batch.size(), h = batch.hole.size(2), w = batch.hole.size(3);
    auto hole = torch::zeros_like(batch.hole);
    for (int64_t i = 0; i < n; ++i) {
        const double area = batch.hole[i].sum().item<double>();
        const auto box = sample_box(area, h, w, filter, rng);
        hole[i].slice(1, box.top, box.top + box.height).slice(2, box.left, box.left + box.width).fill_(1.0);
    }
    out.hole = hole;
    out.masked = torch::where((hole > 0.5).expand_as(batch.target), torch::zeros_like(batch.target), batch.target);
    return out;
}

}  // namespace cognet::train
