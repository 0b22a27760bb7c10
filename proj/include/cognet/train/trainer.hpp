#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "cognet/common/rng.hpp"
#include "cognet/dataprep/dataset.hpp"
#include "cognet/losses/feature_extractor.hpp"
#include "cognet/losses/losses.hpp"
#include "cognet/model/checkpoint.hpp"
#include "cognet/model/cognet.hpp"
#include "cognet/model/discriminator.hpp"

namespace cognet::train {

struct TrainConfig {
    std::filesystem::path data_dir;
    std::filesystem::path out_dir;
    std::filesystem::path extractor_path;  // empty: train one from the dataset
    std::filesystem::path resume_from;     // empty: fresh start

    model::ModelConfig model;
    losses::LossWeights weights;
    losses::GanVariant gan_variant = losses::GanVariant::Wasserstein;
    double lambda_gp = 10.0;

    double learning_rate = 2e-4;
    double beta1 = 0.0;
    double beta2 = 0.99;
    int64_t batch_size = 16;
    int64_t steps = 1000;
    int64_t checkpoint_interval = 500;
    int64_t log_interval = 1;
    uint64_t seed = 0;

    bool object_data = true;  // false: random rectangles instead of instance holes
    bool use_ema = true;
    double ema_decay = 0.999;
    bool float64 = false;  // verification mode
    dataprep::FilterConfig filter;
    losses::ClassifierTrainConfig extractor;

    int64_t inject_nan_at_step = -1;  // fault injection for tests

    void validate() const;
    nlohmann::json to_json() const;
    static TrainConfig from_json(const nlohmann::json& j);
    torch::ScalarType dtype() const { return float64 ? torch::kFloat64 : torch::kFloat32; }
};

struct TrainState {
    model::CogNet generator{nullptr};
    model::CogNet generator_ema{nullptr};  // null when EMA is off
    model::Discriminator discriminator{nullptr};
    std::unique_ptr<torch::optim::Adam> g_opt;
    std::unique_ptr<torch::optim::Adam> d_opt;
    int64_t step = 0;
    Rng rng;
};

// Fresh parameters seeded from cfg.seed.
TrainState make_train_state(const TrainConfig& cfg);

model::Checkpoint to_checkpoint(const TrainState& state, const TrainConfig& cfg);
TrainState from_checkpoint(const model::Checkpoint& ckpt, const TrainConfig& cfg);
TrainState clone_state(const TrainState& state, const TrainConfig& cfg);

struct StepMetrics {
    int64_t step = 0;  // counter after the update
    std::optional<double> class_loss;  // absent when the class embedding is disabled
    double perceptual = 0;
    double gan_g = 0;
    double gan_d = 0;
    double gradient_penalty = 0;
    double total_g = 0;

    nlohmann::json to_json() const;
};

struct CriticLosses {
    torch::Tensor adversarial;  // critic objective, without the penalty
    torch::Tensor penalty;      // unweighted gradient penalty (0 for the logistic variant)
};

struct GeneratorLosses {
    losses::GeneratorLossParts parts;
    torch::Tensor total;
};

// One optimizer step of the critic on real targets vs detached `fake`.
// Generator parameters are not touched.
CriticLosses critic_update(const dataprep::Batch& batch, const torch::Tensor& fake, const torch::Tensor& alpha,
                           TrainState& state, const TrainConfig& cfg);

// One optimizer step of the generator on the losses of `out` (a Train-mode
// forward pass of state.generator). Critic parameters are not touched.
GeneratorLosses generator_update(const dataprep::Batch& batch, const model::ForwardOutput& out, TrainState& state,
                                 const TrainConfig& cfg, losses::FeatureExtractor& extractor);

// One critic update (with gradient penalty) followed by one generator update.
// Throws NumericalError when a loss goes non-finite; the state is then stale.
StepMetrics train_step(const dataprep::Batch& batch, TrainState& state, const TrainConfig& cfg,
                       losses::FeatureExtractor& extractor);

// Average decay applied after `step` completed updates: ramps from 0.1 towards
// `decay` so that short runs are not dominated by the initial weights.
double ema_decay_at(int64_t step, double decay);

// Indices of the batch used at `step`: epoch-wise permutations seeded by (seed, epoch).
std::vector<int64_t> batch_indices(int64_t step, int64_t batch_size, int64_t dataset_size, uint64_t seed);

struct FitResult {
    std::filesystem::path final_checkpoint;
    std::vector<std::filesystem::path> checkpoints;
    StepMetrics last;
};

// Full training run. Checkpoints land in out_dir/checkpoints/step_NNNNNN every
// checkpoint_interval steps and in out_dir/final at the end; metrics go to
// out_dir/train_log.ndjson.
FitResult fit(const TrainConfig& cfg);

// Loads or trains the frozen perceptual backbone for `cfg`.
std::shared_ptr<losses::TrunkExtractor> resolve_extractor(const TrainConfig& cfg, const dataprep::Dataset& ds);

}  // namespace cognet::train
