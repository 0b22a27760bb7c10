#include "cognet/dataprep/coco.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "cognet/common/errors.hpp"

namespace cognet::dataprep {

namespace fs = std::filesystem;
using nlohmann::json;

torch::Tensor rasterize_polygon(const std::vector<double>& xy, int64_t height, int64_t width)
{
    auto mask = torch::zeros({height, width}, torch::kUInt8);
    const size_t n = xy.size() / 2;
    if (n < 3) return mask;
    auto* m = mask.data_ptr<uint8_t>();
    std::vector<double> crossings;
    for (int64_t y = 0; y < height; ++y) {
        const double yc = static_cast<double>(y) + 0.5;
        crossings.clear();
        for (size_t i = 0; i < n; ++i) {
            const size_t j = (i + 1) % n;
            const double x1 = xy[2 * i], y1 = xy[2 * i + 1];
            const double x2 = xy[2 * j], y2 = xy[2 * j + 1];
            if ((y1 <= yc) != (y2 <= yc)) crossings.push_back(x1 + (yc - y1) * (x2 - x1) / (y2 - y1));
        }
        std::sort(crossings.begin(), crossings.end());
        for (size_t k = 0; k + 1 < crossings.size(); k += 2) {
            // pixel centers x + 0.5 in [a, b)
            const auto x0 = static_cast<int64_t>(std::ceil(crossings[k] - 0.5));
            const auto x1 = static_cast<int64_t>(std::ceil(crossings[k + 1] - 0.5));
            for (int64_t x = std::max<int64_t>(x0, 0); x < std::min(x1, width); ++x) m[y * width + x] = 1;
        }
    }
    return mask;
}

torch::Tensor decode_rle(const std::vector<int64_t>& counts, int64_t height, int64_t width)
{
    // Runs are laid out column by column.
    auto colmajor = torch::zeros({width * height}, torch::kUInt8);
    auto* p = colmajor.data_ptr<uint8_t>();
    int64_t pos = 0;
    uint8_t value = 0;
    for (int64_t run : counts) {
        if (run < 0 || pos + run > width * height) throw ParseError("RLE counts exceed mask size");
        std::fill(p + pos, p + pos + run, value);
        pos += run;
        value ^= 1;
    }
    return colmajor.view({width, height}).t().contiguous();
}

std::vector<int64_t> parse_rle_string(const std::string& s)
{
    std::vector<int64_t> counts;
    size_t p = 0;
    while (p < s.size()) {
        int64_t x = 0;
        int k = 0;
        bool more = true;
        while (more) {
            if (p >= s.size()) throw ParseError("truncated RLE string");
            const int64_t c = static_cast<int64_t>(s[p]) - 48;
            x |= (c & 0x1f) << (5 * k);
            more = (c & 0x20) != 0;
            ++p;
            ++k;
            if (!more && (c & 0x10)) x |= static_cast<int64_t>(-1) << (5 * k);
        }
        if (counts.size() > 2) x += counts[counts.size() - 2];
        counts.push_back(x);
    }
    return counts;
}

namespace {

// Returns an empty tensor (numel 0) when the segmentation is unusable;
// `warnings` is bumped once per degenerate part.
torch::Tensor rasterize_segmentation(const json& seg, int64_t h, int64_t w, std::size_t& warnings)
{
    if (seg.is_array()) {
        auto mask = torch::zeros({h, w}, torch::kUInt8);
        bool any = false;
        for (const auto& poly : seg) {
            if (!poly.is_array() || poly.size() < 6 || poly.size() % 2 != 0) {
                ++warnings;
                continue;
            }
            auto xy = poly.get<std::vector<double>>();
            mask |= rasterize_polygon(xy, h, w);
            any = true;
        }
        return any ? mask : torch::Tensor();
    }
    if (seg.is_object() && seg.contains("counts") && seg.contains("size")) {
        const auto size = seg.at("size").get<std::vector<int64_t>>();
        if (size.size() != 2 || size[0] != h || size[1] != w) {
            ++warnings;
            return {};
        }
        const auto& counts = seg.at("counts");
        std::vector<int64_t> runs = counts.is_string() ? parse_rle_string(counts.get<std::string>())
                                                       : counts.get<std::vector<int64_t>>();
        return decode_rle(runs, h, w);
    }
    ++warnings;
    return {};
}

}  // namespace

CocoReadResult read_coco_manifest(const fs::path& annotation_file, const fs::path& image_root)
{
    std::ifstream is(annotation_file);
    if (!is) throw IoError(fmt::format("cannot open annotation file {}", annotation_file.string()));
    json doc;
    try {
        is >> doc;
    } catch (const json::exception& e) {
        throw ParseError(fmt::format("{}: {}", annotation_file.string(), e.what()));
    }
    if (!doc.is_object() || !doc.contains("images") || !doc.contains("categories"))
        throw ParseError(fmt::format("{}: not a COCO annotation document", annotation_file.string()));

    CocoReadResult out;
    auto& m = out.manifest;
    m.image_root = image_root;

    std::vector<std::pair<int64_t, std::string>> cats;
    for (const auto& c : doc.at("categories")) {
        if (!c.contains("id") || !c["id"].is_number_integer()) {
            ++out.warnings;
            continue;
        }
        cats.emplace_back(c["id"].get<int64_t>(), c.value("name", ""));
    }
    std::sort(cats.begin(), cats.end());
    std::map<int64_t, int64_t> dense;
    for (const auto& [id, name] : cats) {
        dense[id] = static_cast<int64_t>(m.categories.size());
        m.categories.push_back({dense[id], name});
    }

    std::map<int64_t, size_t> image_index;
    for (const auto& r : doc.at("images")) {
        try {
            ImageRecord rec{r.at("id"), r.at("file_name"), r.at("width"), r.at("height")};
            if (rec.width <= 0 || rec.height <= 0) throw std::runtime_error("bad size");
            image_index[rec.id] = m.images.size();
            m.images.push_back(std::move(rec));
        } catch (const std::exception&) {
            ++out.warnings;
        }
    }

    for (const auto& a : doc.value("annotations", json::array())) {
        if (!a.contains("image_id") || !a.contains("category_id") || !a.contains("segmentation")) {
            ++out.warnings;
            continue;
        }
        const auto img = image_index.find(a["image_id"].get<int64_t>());
        const auto cat = dense.find(a["category_id"].get<int64_t>());
        if (img == image_index.end() || cat == dense.end()) {
            ++out.warnings;
            continue;
        }
        const auto& rec = m.images[img->second];
        torch::Tensor mask;
        try {
            mask = rasterize_segmentation(a["segmentation"], rec.height, rec.width, out.warnings);
        } catch (const std::exception&) {
            ++out.warnings;
            continue;
        }
        if (!mask.defined() || mask.numel() == 0) continue;
        if (mask.sum().item<int64_t>() == 0) {
            ++out.warnings;
            continue;
        }
        AnnotationRecord ann;
        ann.image_id = rec.id;
        ann.category_id = cat->second;
        ann.mask = mask;
        if (a.contains("id")) ann.extra["coco_id"] = a["id"];
        m.annotations.push_back(std::move(ann));
    }
    m.validate();
    return out;
}

}  // namespace cognet::dataprep
