#include "cognet/losses/feature_extractor.hpp"

#include <fstream>
#include <numeric>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "cognet/common/errors.hpp"
#include "cognet/common/rng.hpp"
#include "cognet/dataprep/dataset.hpp"
#include "cognet/model/checkpoint.hpp"

namespace cognet::losses {

namespace F = torch::nn::functional;
namespace fs = std::filesystem;

torch::Tensor FeatureExtractor::pooled(const torch::Tensor& images)
{
    std::vector<torch::Tensor> parts;
    for (const auto& f : layers(images)) parts.push_back(f.mean({2, 3}));
    return torch::cat(parts, 1);
}

ShapesClassifierImpl::ShapesClassifierImpl(int64_t classes, std::vector<int64_t> w)
    : num_classes(classes), widths(std::move(w))
{
    convs = register_module("convs", torch::nn::ModuleList());
    int64_t in = 3;
    for (auto c : widths) {
        convs->push_back(torch::nn::Conv2d(torch::nn::Conv2dOptions(in, c, 3).padding(1)));
        in = c;
    }
    head = register_module("head", torch::nn::Linear(in, num_classes));
}

std::vector<torch::Tensor> ShapesClassifierImpl::trunk(const torch::Tensor& images)
{
    std::vector<torch::Tensor> out;
    auto h = images;
    for (size_t i = 0; i < convs->size(); ++i) {
        if (i > 0) h = F::avg_pool2d(h, F::AvgPool2dFuncOptions(2));
        h = F::leaky_relu(convs[i]->as<torch::nn::Conv2d>()->forward(h), F::LeakyReLUFuncOptions().negative_slope(0.2));
        out.push_back(h);
    }
    return out;
}

torch::Tensor ShapesClassifierImpl::forward(const torch::Tensor& images)
{
    return head(trunk(images).back().mean({2, 3}));
}

TrunkExtractor::TrunkExtractor(ShapesClassifier classifier) : classifier_(std::move(classifier))
{
    classifier_->eval();
    for (auto& p : classifier_->parameters()) p.set_requires_grad(false);
}

std::vector<torch::Tensor> TrunkExtractor::layers(const torch::Tensor& images)
{
    return classifier_->trunk(images);
}

int64_t TrunkExtractor::feature_dim() const
{
    return std::accumulate(classifier_->widths.begin(), classifier_->widths.end(), int64_t{0});
}

void TrunkExtractor::to(torch::ScalarType dtype)
{
    classifier_->to(dtype);
}

void TrunkExtractor::save(const fs::path& path) const
{
    auto tensors = model::named_tensors(*classifier_);
    tensors["__num_classes"] = torch::tensor(classifier_->num_classes);
    tensors["__widths"] = torch::tensor(classifier_->widths);
    model::save_tensor_archive(path, tensors);
}

std::shared_ptr<TrunkExtractor> TrunkExtractor::load(const fs::path& path)
{
    auto tensors = model::load_tensor_archive(path);
    if (!tensors.count("__num_classes") || !tensors.count("__widths"))
        throw ParseError(fmt::format("{} is not a feature extractor archive", path.string()));
    const auto classes = tensors["__num_classes"].item<int64_t>();
    auto wt = tensors["__widths"].to(torch::kInt64).contiguous();
    std::vector<int64_t> widths(wt.data_ptr<int64_t>(), wt.data_ptr<int64_t>() + wt.numel());
    ShapesClassifier c(classes, widths);
    model::load_named_tensors(*c, tensors);
    return std::make_shared<TrunkExtractor>(c);
}

std::shared_ptr<TrunkExtractor> train_extractor(const std::vector<dataprep::InpaintingSample>& samples,
                                                int64_t num_classes, const ClassifierTrainConfig& cfg,
                                                double* accuracy)
{
    if (samples.empty()) throw InvalidInput("train_extractor: no samples");
    torch::manual_seed(cfg.seed);
    ShapesClassifier net(num_classes);
    torch::optim::Adam opt(net->parameters(), torch::optim::AdamOptions(cfg.learning_rate));
    Rng rng = derive_rng(cfg.seed, 0xC1A55);
    std::uniform_int_distribution<int64_t> pick(0, static_cast<int64_t>(samples.size()) - 1);
    const int64_t batch = std::min<int64_t>(cfg.batch_size, static_cast<int64_t>(samples.size()));
    for (int64_t step = 0; step < cfg.steps; ++step) {
        std::vector<int64_t> idx(static_cast<size_t>(batch));
        for (auto& i : idx) i = pick(rng);
        const auto b = dataprep::make_batch(samples, idx);
        opt.zero_grad();
        auto loss = F::cross_entropy(net(b.target), b.category);
        loss.backward();
        opt.step();
    }
    if (accuracy) {
        torch::NoGradGuard guard;
        int64_t correct = 0;
        for (size_t start = 0; start < samples.size(); start += 64) {
            std::vector<int64_t> idx;
            for (size_t i = start; i < std::min(samples.size(), start + 64); ++i) idx.push_back(static_cast<int64_t>(i));
            const auto b = dataprep::make_batch(samples, idx);
            correct += (net(b.target).argmax(1) == b.category).sum().item<int64_t>();
        }
        *accuracy = static_cast<double>(correct) / static_cast<double>(samples.size());
    }
    return std::make_shared<TrunkExtractor>(net);
}

}  // namespace cognet::losses
