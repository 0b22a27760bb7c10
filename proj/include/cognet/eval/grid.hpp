#pragma once

#include <filesystem>
#include <vector>

#include <torch/torch.h>

namespace cognet::eval {

// Tiles rows of equally sized [3, H, W] images in [-1, 1] into one
// [3, rows*(H+pad)+pad, cols*(W+pad)+pad] mosaic on a white background.
torch::Tensor make_grid(const std::vector<std::vector<torch::Tensor>>& rows, int64_t pad = 2);

// One row per input: input | inpainted x k | ground truth.
void save_sample_grid(const std::filesystem::path& path, const torch::Tensor& inputs,
                      const std::vector<torch::Tensor>& inpainted, const torch::Tensor& targets);

}  // namespace cognet::eval
