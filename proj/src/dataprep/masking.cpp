#include "cognet/dataprep/masking.hpp"

#include <fmt/format.h>

#include "cognet/common/errors.hpp"

namespace cognet::dataprep {

BoundingBox bounding_box(const HoleMask& mask)
{
    BoundingBox box;
    auto rows = mask.indicator.sum(1).nonzero();
    auto cols = mask.indicator.sum(0).nonzero();
    if (rows.numel() == 0) return box;
    box.top = rows.min().item<int64_t>();
    box.bottom = rows.max().item<int64_t>();
    box.left = cols.min().item<int64_t>();
    box.right = cols.max().item<int64_t>();
    return box;
}

RgbImage cut_hole(const RgbImage& target, const HoleMask& hole)
{
    if (target.height() != hole.height() || target.width() != hole.width())
        throw InvalidInput(fmt::format("cut_hole: image is {}x{} but mask is {}x{}", target.height(),
                                       target.width(), hole.height(), hole.width()));
    auto in_hole = (hole.indicator > 0.5).unsqueeze(0).expand_as(target.pixels);
    return RgbImage(torch::where(in_hole, torch::zeros_like(target.pixels), target.pixels));
}

bool filter_instance(const InstanceAnnotation& ann, const FilterConfig& cfg)
{
    const double frac = ann.mask.area_fraction();
    if (frac <= 0.0 || frac < cfg.min_frac || frac > cfg.max_frac) return false;
    const auto box = bounding_box(ann.mask);
    if (box.empty()) return false;
    return box.top >= cfg.border && box.left >= cfg.border &&
           box.bottom <= ann.mask.height() - 1 - cfg.border && box.right <= ann.mask.width() - 1 - cfg.border;
}

torch::Tensor one_hot(int64_t category, int64_t num_classes)
{
    if (category < 0 || category >= num_classes)
        throw InvalidInput(fmt::format("category {} outside [0, {})", category, num_classes));
    auto t = torch::zeros({num_classes});
    t[category] = 1.0;
    return t;
}

InpaintingSample make_sample(const RgbImage& target, const InstanceAnnotation& ann, int64_t num_classes)
{
    InpaintingSample s;
    s.masked_image = cut_hole(target, ann.mask);
    s.hole = ann.mask;
    s.target = target;
    s.category = ann.category_id;
    s.one_hot = one_hot(ann.category_id, num_classes);
    return s;
}

std::vector<InpaintingSample> make_samples(const RgbImage& target,
                                           const std::vector<InstanceAnnotation>& annotations,
                                           const FilterConfig& cfg, int64_t num_classes)
{
    std::vector<InpaintingSample> out;
    for (const auto& ann : annotations) {
        if (ann.mask.height() != target.height() || ann.mask.width() != target.width())
            throw InvalidInput("make_samples: annotation mask does not match image size");
        if (filter_instance(ann, cfg)) out.push_back(make_sample(target, ann, num_classes));
    }
    return out;
}

void validate_sample(const InpaintingSample& s, int64_t num_classes)
{
    const auto& hole = s.hole.indicator;
    if (s.target.pixels.sizes() != s.masked_image.pixels.sizes())
        throw InvalidInput("sample: masked image and target differ in shape");
    if (hole.size(0) != s.target.height() || hole.size(1) != s.target.width())
        throw InvalidInput("sample: hole does not match image size");
    auto known = (hole < 0.5).unsqueeze(0).expand_as(s.target.pixels);
    if (!torch::equal(s.masked_image.pixels.masked_select(known), s.target.pixels.masked_select(known)))
        throw InvalidInput("sample: masked image differs from target in the known region");
    if (!(s.masked_image.pixels.masked_select(~known) == 0).all().item<bool>())
        throw InvalidInput("sample: masked image is not zero inside the hole");
    if (s.one_hot.numel() != num_classes || s.one_hot.sum().item<double>() != 1.0 ||
        s.one_hot[s.category].item<double>() != 1.0)
        throw InvalidInput("sample: one-hot vector inconsistent with category");
}

}  // namespace cognet::dataprep
