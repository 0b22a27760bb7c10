#pragma once

#include <filesystem>
#include <map>
#include <string>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "cognet/model/cognet.hpp"
#include "cognet/model/config.hpp"

namespace cognet::model {

using TensorMap = std::map<std::string, torch::Tensor>;

// Parameters and buffers keyed by their dotted module path, e.g.
// "bottom_up.blocks.0.conv1.weight"; `prefix` is prepended with a dot.
TensorMap named_tensors(const torch::nn::Module& module, const std::string& prefix = {});

// Copies every entry of `prefix.*` in `tensors` into `module`. Missing names
// and shape mismatches throw ParseError.
void load_named_tensors(torch::nn::Module& module, const TensorMap& tensors, const std::string& prefix = {});

// Pickled dict[str, Tensor]; readable from Python with torch.load.
void save_tensor_archive(const std::filesystem::path& path, const TensorMap& tensors);
TensorMap load_tensor_archive(const std::filesystem::path& path);

// Checkpoint directory:
//   params.pt      generator.*, generator_ema.* (optional), discriminator.*
//   optimizer.pt   <group>.<param>.exp_avg / .exp_avg_sq / .step
//   metadata.json  {"model": ModelConfig, "categories": [...], "step": n, "rng_state": "...", ...}
struct Checkpoint {
    ModelConfig model;
    nlohmann::json metadata = nlohmann::json::object();
    TensorMap params;
    TensorMap optimizer;
};

// Written into a temporary sibling directory then renamed over `dir`.
void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

// Builds a generator from a checkpoint, preferring the EMA weights when present.
CogNet load_generator(const std::filesystem::path& dir, bool prefer_ema = true, nlohmann::json* metadata = nullptr);

}  // namespace cognet::model
