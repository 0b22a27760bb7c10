#include "cognet/dataprep/manifest.hpp"

#include <fstream>
#include <set>

#include <fmt/format.h>

#include "cognet/common/errors.hpp"

namespace cognet::dataprep {

namespace fs = std::filesystem;

const ImageRecord& DatasetManifest::image(int64_t image_id) const
{
    for (const auto& rec : images)
        if (rec.id == image_id) return rec;
    throw InvalidInput(fmt::format("manifest has no image with id {}", image_id));
}

std::vector<const AnnotationRecord*> DatasetManifest::annotations_for(int64_t image_id) const
{
    std::vector<const AnnotationRecord*> out;
    for (const auto& a : annotations)
        if (a.image_id == image_id) out.push_back(&a);
    return out;
}

void DatasetManifest::validate() const
{
    for (size_t i = 0; i < categories.size(); ++i)
        if (categories[i].id != static_cast<int64_t>(i))
            throw InvalidInput("manifest category ids must be dense and ordered");
    std::set<int64_t> ids;
    for (const auto& rec : images) ids.insert(rec.id);
    for (const auto& a : annotations) {
        if (!ids.count(a.image_id))
            throw InvalidInput(fmt::format("annotation references missing image {}", a.image_id));
        if (a.category_id < 0 || a.category_id >= num_classes())
            throw InvalidInput(fmt::format("annotation category {} outside [0, {})", a.category_id, num_classes()));
    }
}

nlohmann::json to_json(const DatasetManifest& m)
{
    nlohmann::json j;
    j["format"] = "cognet-manifest-v1";
    j["split"] = m.split;
    j["categories"] = nlohmann::json::array();
    for (const auto& c : m.categories) j["categories"].push_back({{"id", c.id}, {"name", c.name}});
    j["images"] = nlohmann::json::array();
    for (const auto& r : m.images)
        j["images"].push_back({{"id", r.id}, {"file", r.file}, {"width", r.width}, {"height", r.height}});
    j["annotations"] = nlohmann::json::array();
    for (const auto& a : m.annotations) {
        nlohmann::json ja{{"image_id", a.image_id}, {"category_id", a.category_id}, {"mask_file", a.mask_file}};
        if (!a.extra.empty()) ja["extra"] = a.extra;
        j["annotations"].push_back(std::move(ja));
    }
    return j;
}

DatasetManifest manifest_from_json(const nlohmann::json& j, const fs::path& root)
{
    DatasetManifest m;
    try {
        m.image_root = root;
        m.split = j.value("split", "train");
        for (const auto& c : j.at("categories")) m.categories.push_back({c.at("id"), c.at("name")});
        for (const auto& r : j.at("images")) m.images.push_back({r.at("id"), r.at("file"), r.at("width"), r.at("height")});
        for (const auto& a : j.at("annotations")) {
            AnnotationRecord rec;
            rec.image_id = a.at("image_id");
            rec.category_id = a.at("category_id");
            rec.mask_file = a.value("mask_file", "");
            if (a.contains("extra")) rec.extra = a["extra"];
            m.annotations.push_back(std::move(rec));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(fmt::format("malformed manifest: {}", e.what()));
    }
    m.validate();
    return m;
}

void DatasetManifest::save(const fs::path& dir) const
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    std::ofstream os(dir / "manifest.json");
    if (!os) throw IoError(fmt::format("cannot write {}", (dir / "manifest.json").string()));
    os << to_json(*this).dump(1) << "\n";
}

DatasetManifest DatasetManifest::load(const fs::path& dir)
{
    std::ifstream is(dir / "manifest.json");
    if (!is) throw IoError(fmt::format("cannot open {}", (dir / "manifest.json").string()));
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(fmt::format("manifest.json: {}", e.what()));
    }
    return manifest_from_json(j, dir);
}

}  // namespace cognet::dataprep
