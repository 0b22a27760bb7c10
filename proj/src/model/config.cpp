#include "cognet/model/config.hpp"

#include <fmt/format.h>

#include "cognet/common/errors.hpp"

namespace cognet::model {

void ModelConfig::validate() const
{
    if (num_scales < 1) throw InvalidInput("num_scales must be >= 1");
    if (static_cast<int64_t>(channels.size()) != num_scales)
        throw InvalidInput(fmt::format("expected {} channel widths, got {}", num_scales, channels.size()));
    if (image_size < 16 || image_size % (int64_t{1} << (num_scales - 1)) != 0)
        throw InvalidInput(fmt::format("image size {} must be >= 16 and divisible by 2^(L-1) = {}", image_size,
                                       int64_t{1} << (num_scales - 1)));
    for (auto c : channels)
        if (c < 1) throw InvalidInput("channel widths must be >= 1");
    if (num_classes < 2) throw InvalidInput("num_classes must be >= 2");
    if (z_dim < 1 || mapped_dim < 1 || h_dim < 1) throw InvalidInput("latent and embedding dims must be >= 1");
    if (disc_channels.empty()) throw InvalidInput("discriminator needs at least one width");
    for (auto c : disc_channels)
        if (c < 1) throw InvalidInput("discriminator widths must be >= 1");
    if ((image_size >> (disc_channels.size() - 1)) < 2)
        throw InvalidInput("too many discriminator levels for the image size");
    // The top-down stream is driven by the PCE prediction at inference time.
    if (use_top_down && !use_pce) throw InvalidInput("the top-down stream requires the class embedding (use_pce)");
}

nlohmann::json ModelConfig::to_json() const
{
    return {{"image_size", image_size}, {"num_scales", num_scales}, {"channels", channels},
            {"num_classes", num_classes}, {"z_dim", z_dim},         {"mapped_dim", mapped_dim},
            {"h_dim", h_dim},           {"disc_channels", disc_channels}, {"use_pce", use_pce},
            {"use_top_down", use_top_down}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j)
{
    ModelConfig c;
    try {
        c.image_size = j.at("image_size");
        c.num_scales = j.at("num_scales");
        c.channels = j.at("channels").get<std::vector<int64_t>>();
        c.num_classes = j.at("num_classes");
        c.z_dim = j.at("z_dim");
        c.mapped_dim = j.at("mapped_dim");
        c.h_dim = j.at("h_dim");
        c.disc_channels = j.at("disc_channels").get<std::vector<int64_t>>();
        c.use_pce = j.at("use_pce");
        c.use_top_down = j.at("use_top_down");
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(fmt::format("model config: {}", e.what()));
    }
    c.validate();
    return c;
}

ModelConfig ModelConfig::micro()
{
    ModelConfig c;
    c.image_size = 16;
    c.num_scales = 2;
    c.channels = {4, 6};
    c.num_classes = 2;
    c.z_dim = 3;
    c.mapped_dim = 3;
    c.h_dim = 3;
    c.disc_channels = {4, 6};
    return c;
}

}  // namespace cognet::model
