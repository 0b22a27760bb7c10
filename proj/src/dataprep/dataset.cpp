#include "cognet/dataprep/dataset.hpp"

#include <fstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "cognet/common/errors.hpp"
#include "cognet/dataprep/coco.hpp"

namespace cognet::dataprep {

namespace fs = std::filesystem;
using nlohmann::json;

Batch Batch::to(torch::ScalarType dtype) const
{
    return {masked.to(dtype), hole.to(dtype), target.to(dtype), category, one_hot.to(dtype)};
}

Batch make_batch(const std::vector<InpaintingSample>& samples, std::span<const int64_t> indices)
{
    if (indices.empty()) throw InvalidInput("empty batch");
    std::vector<torch::Tensor> masked, hole, target, onehot;
    std::vector<int64_t> cats;
    for (int64_t i : indices) {
        const auto& s = samples.at(static_cast<size_t>(i));
        masked.push_back(s.masked_image.pixels);
        hole.push_back(s.hole.indicator.unsqueeze(0));
        target.push_back(s.target.pixels);
        onehot.push_back(s.one_hot);
        cats.push_back(s.category);
    }
    return {torch::stack(masked), torch::stack(hole), torch::stack(target),
            torch::tensor(cats, torch::kInt64), torch::stack(onehot)};
}

Batch make_batch(const std::vector<InpaintingSample>& samples)
{
    std::vector<int64_t> idx(samples.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int64_t>(i);
    return make_batch(samples, idx);
}

namespace {

Dataset load_manifest_dir(const fs::path& dir, const FilterConfig& filter)
{
    const auto m = DatasetManifest::load(dir);
    Dataset ds;
    ds.categories = m.categories;
    for (const auto& rec : m.images) {
        const auto target = load_rgb(dir / rec.file);
        std::vector<InstanceAnnotation> anns;
        for (const auto* a : m.annotations_for(rec.id)) {
            if (a->mask_file.empty()) continue;
            anns.push_back({load_mask(dir / a->mask_file), a->category_id});
        }
        for (auto& s : make_samples(target, anns, filter, m.num_classes())) ds.samples.push_back(std::move(s));
    }
    return ds;
}

Dataset load_prepared_dir(const fs::path& dir)
{
    std::ifstream hs(dir / "dataset.json");
    json header;
    try {
        hs >> header;
    } catch (const json::exception& e) {
        throw ParseError(fmt::format("dataset.json: {}", e.what()));
    }
    Dataset ds;
    for (const auto& c : header.at("categories")) ds.categories.push_back({c.at("id"), c.at("name")});
    std::ifstream is(dir / "samples.ndjson");
    if (!is) throw IoError(fmt::format("cannot open {}", (dir / "samples.ndjson").string()));
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto j = json::parse(line);
        const auto target = load_rgb(dir / j.at("image").get<std::string>());
        const auto hole = load_mask(dir / j.at("hole").get<std::string>());
        ds.samples.push_back(make_sample(target, {hole, j.at("category").get<int64_t>()}, ds.num_classes()));
    }
    return ds;
}

}  // namespace

Dataset load_dataset(const fs::path& dir, const FilterConfig& filter)
{
    if (fs::exists(dir / "manifest.json")) return load_manifest_dir(dir, filter);
    if (fs::exists(dir / "dataset.json")) return load_prepared_dir(dir);
    throw IoError(fmt::format("{} holds neither manifest.json nor dataset.json", dir.string()));
}

PrepareReport prepare_coco(const fs::path& annotation_file, const fs::path& image_root, const fs::path& out_dir,
                           const FilterConfig& filter, std::optional<int64_t> size)
{
    auto read = read_coco_manifest(annotation_file, image_root);
    const auto& m = read.manifest;
    PrepareReport report;
    report.warnings = read.warnings;

    std::error_code ec;
    fs::create_directories(out_dir / "samples", ec);
    if (ec || !fs::is_directory(out_dir / "samples"))
        throw IoError(fmt::format("cannot create {}", (out_dir / "samples").string()));
    std::ofstream index(out_dir / "samples.ndjson");
    if (!index) throw IoError(fmt::format("cannot write {}", (out_dir / "samples.ndjson").string()));

    for (const auto& rec : m.images) {
        const auto anns = m.annotations_for(rec.id);
        if (anns.empty()) continue;
        ++report.images;
        cv::Mat bgr = cv::imread((image_root / rec.file).string(), cv::IMREAD_COLOR);
        if (bgr.empty()) {
            ++report.warnings;
            continue;
        }
        if (bgr.rows != rec.height || bgr.cols != rec.width) {
            ++report.warnings;
            continue;
        }
        if (size) cv::resize(bgr, bgr, cv::Size(static_cast<int>(*size), static_cast<int>(*size)), 0, 0, cv::INTER_AREA);
        cv::Mat rgb;
        cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
        const RgbImage target(u8_to_unit(torch::from_blob(rgb.data, {rgb.rows, rgb.cols, 3}, torch::kUInt8).clone()));

        for (const auto* a : anns) {
            ++report.instances;
            torch::Tensor mask = a->mask->contiguous();
            if (size) {
                cv::Mat mm(static_cast<int>(mask.size(0)), static_cast<int>(mask.size(1)), CV_8UC1, mask.data_ptr<uint8_t>());
                cv::Mat resized;
                cv::resize(mm, resized, cv::Size(static_cast<int>(*size), static_cast<int>(*size)), 0, 0, cv::INTER_NEAREST);
                mask = torch::from_blob(resized.data, {resized.rows, resized.cols}, torch::kUInt8).clone();
            }
            const InstanceAnnotation inst{HoleMask(mask.to(torch::kFloat32)), a->category_id};
            if (!filter_instance(inst, filter)) continue;
            const auto stem = fmt::format("samples/{:06d}", report.shards);
            save_rgb(out_dir / (stem + "_target.png"), target);
            save_mask(out_dir / (stem + "_hole.png"), inst.mask);
            index << json{{"id", report.shards},
                          {"image", stem + "_target.png"},
                          {"hole", stem + "_hole.png"},
                          {"category", inst.category_id},
                          {"source_image_id", rec.id}}.dump()
                  << "\n";
            ++report.shards;
        }
    }

    json header{{"format", "cognet-samples-v1"},
                {"num_samples", report.shards},
                {"filter", {{"min_frac", filter.min_frac}, {"max_frac", filter.max_frac}, {"border", filter.border}}},
                {"categories", json::array()}};
    for (const auto& c : m.categories) header["categories"].push_back({{"id", c.id}, {"name", c.name}});
    std::ofstream hs(out_dir / "dataset.json");
    hs << header.dump(1) << "\n";
    std::ofstream ss(out_dir / "prepare_stats.json");
    ss << json{{"images", report.images}, {"instances", report.instances}, {"shards", report.shards},
               {"warnings", report.warnings}}.dump(1)
       << "\n";
    return report;
}

}  // namespace cognet::dataprep
