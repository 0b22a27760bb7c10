#pragma once

#include <cstdint>
#include <random>
#include <string>

#include <torch/torch.h>

namespace cognet {

// Every stochastic choice in the project goes through this engine so that a
// single seed reproduces a run and the state can be checkpointed as text.
using Rng = std::mt19937_64;

// Standard normal tensor drawn from `rng` (row-major fill order).
torch::Tensor randn(Rng& rng, torch::IntArrayRef shape, torch::ScalarType dtype = torch::kFloat32);

// Uniform [0, 1) tensor drawn from `rng`.
torch::Tensor rand_uniform(Rng& rng, torch::IntArrayRef shape, torch::ScalarType dtype = torch::kFloat32);

std::string serialize_rng(const Rng& rng);
Rng deserialize_rng(const std::string& state);

// Derive an independent stream from (seed, salt) without touching a parent engine.
Rng derive_rng(std::uint64_t seed, std::uint64_t salt);

}  // namespace cognet
