#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

namespace cognet::dataprep {

struct Category {
    int64_t id = 0;  // dense, in [0, C)
    std::string name;
};

struct ImageRecord {
    int64_t id = 0;
    std::string file;  // relative to DatasetManifest::image_root
    int64_t width = 0;
    int64_t height = 0;
};

struct AnnotationRecord {
    int64_t image_id = 0;
    int64_t category_id = 0;
    std::string mask_file;              // relative to image_root; empty when `mask` is held in memory
    std::optional<torch::Tensor> mask;  // uint8 [H, W], 1 = instance
    nlohmann::json extra = nlohmann::json::object();
};

struct DatasetManifest {
    std::string split = "train";
    std::filesystem::path image_root;
    std::vector<Category> categories;
    std::vector<ImageRecord> images;
    std::vector<AnnotationRecord> annotations;

    int64_t num_classes() const { return static_cast<int64_t>(categories.size()); }
    const ImageRecord& image(int64_t image_id) const;
    std::vector<const AnnotationRecord*> annotations_for(int64_t image_id) const;

    // Throws InvalidInput on dangling image references or non-dense category ids.
    void validate() const;

    // Writes `manifest.json` into `dir`; masks held in memory are not serialized.
    void save(const std::filesystem::path& dir) const;
    static DatasetManifest load(const std::filesystem::path& dir);
};

nlohmann::json to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(const nlohmann::json& j, const std::filesystem::path& root);

}  // namespace cognet::dataprep
