#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "cognet/dataprep/dataset.hpp"
#include "cognet/losses/feature_extractor.hpp"
#include "cognet/model/cognet.hpp"

namespace cognet::eval {

struct EvalConfig {
    std::filesystem::path checkpoint;      // ignored with identity_model
    std::filesystem::path data_dir;        // held-out split
    std::filesystem::path extractor_path;  // frozen trunk trained on real images
    std::filesystem::path out_dir;         // report.json and grids; empty = no files
    int64_t max_images = 512;              // 0 = all
    int64_t batch_size = 32;
    uint64_t seed = 0;
    bool hard_prediction = false;
    bool use_ema = true;
    bool identity_model = false;  // "inpaint" with the ground truth
    int64_t grid_rows = 8;        // 0 disables the sample grid
    int64_t grid_samples = 3;     // latent draws per grid row

    void validate() const;
    nlohmann::json to_json() const;
};

struct CategoryMetrics {
    std::string name;
    int64_t n_images = 0;
    double lpips_proxy = 0.0;
    double class_accuracy = 0.0;
};

struct MetricsReport {
    double fid = 0.0;
    double lpips_proxy = 0.0;
    double class_accuracy = -1.0;  // argmax of predicted class; -1 without PCE
    int64_t n_images = 0;
    int64_t failures = 0;
    bool fid_regularized = false;
    std::string fingerprint;
    std::vector<CategoryMetrics> per_category;

    nlohmann::json to_json() const;
    std::string table() const;
};

// Composited inpainting of a batch with one latent draw per sample.
struct InpaintResult {
    torch::Tensor composite;  // [B, 3, H, W]
    torch::Tensor predicted;  // [B] int64, undefined when the model has no class head
};
using Inpainter = std::function<InpaintResult(const dataprep::Batch&, const torch::Tensor& z)>;

Inpainter model_inpainter(model::CogNet generator, const model::ForwardOptions& opts);
Inpainter identity_inpainter();

// Core evaluation loop: inpaints every sample, then compares the composites
// with the real targets. Failing batches are retried one image at a time and
// images that still fail are counted and skipped.
MetricsReport evaluate_samples(const Inpainter& inpainter, int64_t z_dim, const dataprep::Dataset& data,
                               losses::FeatureExtractor& fx, const EvalConfig& cfg);

// Loads checkpoint, split and extractor; writes report.json and grid.png into out_dir.
MetricsReport evaluate(const EvalConfig& cfg);

// One ablation setting evaluated over several seeds.
struct AblationRow {
    bool object_data = true;
    bool use_pce = true;
    bool use_top_down = true;
    std::vector<MetricsReport> runs;

    double median_fid() const;
    double median_lpips() const;
};

// Object data / PCE / top-down check marks followed by the seed-median FID and
// perceptual proxy, one line per row.
std::string ablation_table(const std::vector<AblationRow>& rows);

// Fraction of samples whose argmax class prediction equals the category.
double class_accuracy(model::CogNet generator, const std::vector<dataprep::InpaintingSample>& samples,
                      int64_t batch_size = 64);

}  // namespace cognet::eval
