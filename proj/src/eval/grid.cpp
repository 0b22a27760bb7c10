#include "cognet/eval/grid.hpp"

#include "cognet/common/errors.hpp"
#include "cognet/common/image.hpp"

namespace cognet::eval {

torch::Tensor make_grid(const std::vector<std::vector<torch::Tensor>>& rows, int64_t pad)
{
    if (rows.empty() || rows.front().empty()) throw InvalidInput("make_grid: no images");
    const auto ref = rows.front().front();
    if (ref.dim() != 3 || ref.size(0) != 3) throw InvalidInput("make_grid: images must be [3, H, W]");
    const int64_t h = ref.size(1), w = ref.size(2);
    size_t cols = 0;
    for (const auto& r : rows) cols = std::max(cols, r.size());
    const auto n_rows = static_cast<int64_t>(rows.size());
    const auto n_cols = static_cast<int64_t>(cols);
    auto canvas = torch::ones({3, n_rows * (h + pad) + pad, n_cols * (w + pad) + pad}, torch::kFloat32);
    for (int64_t r = 0; r < n_rows; ++r) {
        for (size_t c = 0; c < rows[static_cast<size_t>(r)].size(); ++c) {
            const auto& img = rows[static_cast<size_t>(r)][c];
            if (img.sizes() != ref.sizes()) throw InvalidInput("make_grid: images differ in shape");
            const int64_t y = pad + r * (h + pad), x = pad + static_cast<int64_t>(c) * (w + pad);
            canvas.slice(1, y, y + h).slice(2, x, x + w).copy_(img.detach().to(torch::kFloat32));
        }
    }
    return canvas;
}

void save_sample_grid(const std::filesystem::path& path, const torch::Tensor& inputs,
                      const std::vector<torch::Tensor>& inpainted, const torch::Tensor& targets)
{
    std::vector<std::vector<torch::Tensor>> rows;
    for (int64_t i = 0; i < inputs.size(0); ++i) {
        std::vector<torch::Tensor> row{inputs[i]};
        for (const auto& s : inpainted) row.push_back(s[i]);
        row.push_back(targets[i]);
        rows.push_back(std::move(row));
    }
    save_rgb(path, make_grid(rows).clamp(-1.0, 1.0));
}

}  // namespace cognet::eval
