#pragma once

#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

namespace cognet::model {

struct ModelConfig {
    int64_t image_size = 64;                      // N
    int64_t num_scales = 4;                       // L
    std::vector<int64_t> channels{32, 64, 128, 256};  // width of scale l, shared by both encoders and the decoder
    int64_t num_classes = 4;                      // C
    int64_t z_dim = 64;
    int64_t mapped_dim = 64;                      // output width of the latent mapping network
    int64_t h_dim = 64;                           // class embedding width
    std::vector<int64_t> disc_channels{32, 64, 128, 256};
    bool use_pce = true;
    bool use_top_down = true;

    int64_t style_dim() const { return mapped_dim + h_dim; }
    int64_t scale_size(int64_t l) const { return image_size >> l; }

    void validate() const;
    nlohmann::json to_json() const;
    static ModelConfig from_json(const nlohmann::json& j);

    // N=16, L=2, C=2 with tiny widths; used by the gradient checks.
    static ModelConfig micro();
};

}  // namespace cognet::model
