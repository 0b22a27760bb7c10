#include "cognet/eval/evaluate.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "cognet/common/errors.hpp"
#include "cognet/common/rng.hpp"
#include "cognet/eval/fid.hpp"
#include "cognet/eval/grid.hpp"
#include "cognet/model/checkpoint.hpp"

namespace cognet::eval {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fnv1a_hex(const std::string& s)
{
    uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return fmt::format("{:016x}", h);
}

torch::ScalarType param_dtype(const model::CogNet& g)
{
    const auto params = g->parameters();
    return params.empty() ? torch::kFloat32 : params.front().scalar_type();
}

}  // namespace

void EvalConfig::validate() const
{
    if (!identity_model && checkpoint.empty()) throw InvalidInput("eval: checkpoint is required");
    if (data_dir.empty()) throw InvalidInput("eval: data directory is required");
    if (max_images < 0) throw InvalidInput("eval: max_images must be >= 0");
    if (batch_size < 1) throw InvalidInput("eval: batch_size must be >= 1");
    if (grid_rows < 0 || grid_samples < 1) throw InvalidInput("eval: grid sizes must be positive");
}

json EvalConfig::to_json() const
{
    return {{"checkpoint", checkpoint.string()},
            {"data_dir", data_dir.string()},
            {"extractor", extractor_path.string()},
            {"max_images", max_images},
            {"batch_size", batch_size},
            {"seed", seed},
            {"hard_prediction", hard_prediction},
            {"use_ema", use_ema},
            {"identity_model", identity_model}};
}

json MetricsReport::to_json() const
{
    json cats = json::array();
    for (const auto& c : per_category)
        cats.push_back({{"category", c.name},
                        {"n_images", c.n_images},
                        {"lpips_proxy", c.lpips_proxy},
                        {"class_accuracy", c.class_accuracy}});
    return {{"reference",
             {{"note", "published full-scale COCO 256x256 values; not comparable with the toy feature space"},
              {"fid", 4.700},
              {"lpips", 0.1049}}},
            {"metric_space", "FID (toy feature space)"},
            {"fid", fid},
            {"lpips_proxy", lpips_proxy},
            {"class_accuracy", class_accuracy >= 0.0 ? json(class_accuracy) : json(nullptr)},
            {"n_images", n_images},
            {"failures", failures},
            {"fid_regularized", fid_regularized},
            {"fingerprint", fingerprint},
            {"per_category", cats}};
}

std::string MetricsReport::table() const
{
    std::ostringstream os;
    os << fmt::format("{:<20} {:>8} {:>12} {:>10}\n", "category", "images", "lpips_proxy", "accuracy");
    for (const auto& c : per_category)
        os << fmt::format("{:<20} {:>8} {:>12.5f} {:>10.4f}\n", c.name, c.n_images, c.lpips_proxy, c.class_accuracy);
    os << fmt::format("{:<20} {:>8} {:>12.5f} {:>10}\n", "all", n_images, lpips_proxy,
                      class_accuracy >= 0.0 ? fmt::format("{:.4f}", class_accuracy) : std::string("-"));
    os << fmt::format("FID (toy feature space): {:.5f}   failures: {}   fingerprint: {}\n", fid, failures,
                      fingerprint);
    return os.str();
}

namespace {

double median(std::vector<double> v)
{
    if (v.empty()) throw InvalidInput("median of an empty list");
    std::sort(v.begin(), v.end());
    const size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace

double AblationRow::median_fid() const
{
    std::vector<double> v;
    for (const auto& r : runs) v.push_back(r.fid);
    return median(v);
}

double AblationRow::median_lpips() const
{
    std::vector<double> v;
    for (const auto& r : runs) v.push_back(r.lpips_proxy);
    return median(v);
}

std::string ablation_table(const std::vector<AblationRow>& rows)
{
    const auto mark = [](bool on) { return on ? "x" : "-"; };
    std::ostringstream os;
    os << fmt::format("{:>11} {:>5} {:>8} {:>12} {:>12}  per-seed FID\n", "object data", "PCE", "top-down", "FID",
                      "lpips_proxy");
    for (const auto& r : rows) {
        std::vector<std::string> seeds;
        for (const auto& m : r.runs) seeds.push_back(fmt::format("{:.5f}", m.fid));
        os << fmt::format("{:>11} {:>5} {:>8} {:>12.5f} {:>12.5f}  {}\n", mark(r.object_data), mark(r.use_pce),
                          mark(r.use_top_down), r.median_fid(), r.median_lpips(), fmt::join(seeds, " "));
    }
    return os.str();
}

Inpainter model_inpainter(model::CogNet generator, const model::ForwardOptions& opts)
{
    generator->eval();
    const auto dtype = param_dtype(generator);
    const bool has_pce = generator->config.use_pce;
    return [generator, opts, dtype, has_pce](const dataprep::Batch& batch, const torch::Tensor& z) mutable {
        torch::NoGradGuard guard;
        const auto b = batch.to(dtype);
        auto out = generator->forward(b.masked, b.hole, z.to(dtype), opts);
        InpaintResult r{out.composite.to(torch::kFloat32), {}};
        if (has_pce) r.predicted = out.prediction.probabilities.argmax(1);
        return r;
    };
}

Inpainter identity_inpainter()
{
    return [](const dataprep::Batch& batch, const torch::Tensor&) {
        return InpaintResult{batch.target.to(torch::kFloat32), batch.category.clone()};
    };
}

MetricsReport evaluate_samples(const Inpainter& inpainter, int64_t z_dim, const dataprep::Dataset& data,
                               losses::FeatureExtractor& fx, const EvalConfig& cfg)
{
    const auto& samples = data.samples;
    int64_t n = static_cast<int64_t>(samples.size());
    if (cfg.max_images > 0) n = std::min(n, cfg.max_images);
    if (n < 2) throw InvalidInput("eval: the split needs at least two samples");

    Rng rng = derive_rng(cfg.seed, 0x6576616cULL);
    std::vector<torch::Tensor> composites, targets, categories, predictions;
    int64_t failures = 0;
    bool has_predictions = true;

    const auto keep = [&](const dataprep::Batch& b, const InpaintResult& r) {
        composites.push_back(r.composite);
        targets.push_back(b.target.to(torch::kFloat32));
        categories.push_back(b.category);
        if (r.predicted.defined()) predictions.push_back(r.predicted);
        else has_predictions = false;
    };

    for (int64_t start = 0; start < n; start += cfg.batch_size) {
        const int64_t stop = std::min(n, start + cfg.batch_size);
        std::vector<int64_t> idx(static_cast<size_t>(stop - start));
        std::iota(idx.begin(), idx.end(), start);
        const auto batch = dataprep::make_batch(samples, idx);
        const auto z = randn(rng, {batch.size(), z_dim}, torch::kFloat32);
        try {
            auto r = inpainter(batch, z);
            if (!torch::isfinite(r.composite).all().item<bool>()) throw NumericalError("non-finite composite");
            keep(batch, r);
        } catch (const NumericalError&) {
            for (int64_t i = 0; i < batch.size(); ++i) {
                const std::array<int64_t, 1> one{start + i};
                const auto single = dataprep::make_batch(samples, one);
                try {
                    auto r = inpainter(single, z.slice(0, i, i + 1));
                    if (!torch::isfinite(r.composite).all().item<bool>())
                        throw NumericalError("non-finite composite");
                    keep(single, r);
                } catch (const NumericalError& e) {
                    ++failures;
                    std::cerr << fmt::format("warning: sample {} failed: {}\n", start + i, e.what());
                }
            }
        }
    }
    if (composites.empty()) throw NumericalError("eval: every sample failed");

    const auto fake = torch::cat(composites);
    const auto real = torch::cat(targets);
    const auto cats = torch::cat(categories);

    MetricsReport report;
    report.n_images = fake.size(0);
    report.failures = failures;
    report.fid = frechet_distance(extract_stats(fake, fx), extract_stats(real, fx), &report.fid_regularized);
    torch::Tensor per_pair;
    {
        std::vector<torch::Tensor> parts;
        for (int64_t i = 0; i < fake.size(0); i += cfg.batch_size) {
            const int64_t j = std::min(fake.size(0), i + cfg.batch_size);
            parts.push_back(lpips_proxy_per_pair(fake.slice(0, i, j), real.slice(0, i, j), fx));
        }
        per_pair = torch::cat(parts);
    }
    report.lpips_proxy = per_pair.mean().item<double>();
    torch::Tensor correct;
    if (has_predictions && !predictions.empty()) {
        correct = torch::cat(predictions).eq(cats).to(torch::kFloat64);
        report.class_accuracy = correct.mean().item<double>();
    }
    for (const auto& c : data.categories) {
        const auto sel = cats.eq(c.id);
        const int64_t count = sel.sum().item<int64_t>();
        if (count == 0) continue;
        CategoryMetrics m;
        m.name = c.name;
        m.n_images = count;
        m.lpips_proxy = per_pair.masked_select(sel).mean().item<double>();
        m.class_accuracy = correct.defined() ? correct.masked_select(sel).mean().item<double>() : -1.0;
        report.per_category.push_back(m);
    }
    report.fingerprint = fnv1a_hex(cfg.to_json().dump() + fmt::format("|n={}", n));
    return report;
}

double class_accuracy(model::CogNet generator, const std::vector<dataprep::InpaintingSample>& samples,
                      int64_t batch_size)
{
    if (!generator->config.use_pce) throw InvalidInput("class_accuracy: the model has no class head");
    if (samples.empty()) throw InvalidInput("class_accuracy: no samples");
    torch::NoGradGuard guard;
    generator->eval();
    const auto dtype = param_dtype(generator);
    int64_t hits = 0;
    const auto n = static_cast<int64_t>(samples.size());
    for (int64_t start = 0; start < n; start += batch_size) {
        std::vector<int64_t> idx(static_cast<size_t>(std::min(n, start + batch_size) - start));
        std::iota(idx.begin(), idx.end(), start);
        const auto b = dataprep::make_batch(samples, idx).to(dtype);
        const auto features = generator->encode_bottom_up(b.masked, b.hole);
        const auto pred = generator->pce->forward(features.maps.back());
        hits += pred.probabilities.argmax(1).eq(b.category).sum().item<int64_t>();
    }
    return static_cast<double>(hits) / static_cast<double>(n);
}

MetricsReport evaluate(const EvalConfig& cfg)
{
    cfg.validate();
    if (!cfg.identity_model && !fs::exists(cfg.checkpoint / "metadata.json"))
        throw IoError("eval: checkpoint not found: " + cfg.checkpoint.string());
    if (cfg.extractor_path.empty() && !cfg.identity_model)
        throw InvalidInput("eval: a feature extractor path is required");

    const auto data = dataprep::load_dataset(cfg.data_dir);
    std::shared_ptr<losses::FeatureExtractor> fx;
    if (!cfg.extractor_path.empty()) fx = losses::TrunkExtractor::load(cfg.extractor_path);
    else fx = std::make_shared<losses::IdentityExtractor>();

    Inpainter inpainter;
    int64_t z_dim = 1;
    model::CogNet generator{nullptr};
    model::ForwardOptions opts{model::Mode::Inference, cfg.hard_prediction};
    if (cfg.identity_model) {
        inpainter = identity_inpainter();
    } else {
        generator = model::load_generator(cfg.checkpoint, cfg.use_ema);
        z_dim = generator->config.z_dim;
        inpainter = model_inpainter(generator, opts);
    }
    auto report = evaluate_samples(inpainter, z_dim, data, *fx, cfg);

    if (!cfg.out_dir.empty()) {
        fs::create_directories(cfg.out_dir);
        json doc = report.to_json();
        doc["config"] = cfg.to_json();
        std::ofstream(cfg.out_dir / "report.json") << doc.dump(2) << '\n';
        if (cfg.grid_rows > 0) {
            const int64_t rows = std::min<int64_t>(cfg.grid_rows, static_cast<int64_t>(data.samples.size()));
            std::vector<int64_t> idx(static_cast<size_t>(rows));
            std::iota(idx.begin(), idx.end(), 0);
            const auto batch = dataprep::make_batch(data.samples, idx);
            Rng rng = derive_rng(cfg.seed, 0x67726964ULL);
            std::vector<torch::Tensor> draws;
            for (int64_t k = 0; k < cfg.grid_samples; ++k)
                draws.push_back(inpainter(batch, randn(rng, {rows, z_dim}, torch::kFloat32)).composite);
            save_sample_grid(cfg.out_dir / "grid.png", batch.masked.to(torch::kFloat32), draws,
                             batch.target.to(torch::kFloat32));
        }
    }
    return report;
}

}  // namespace cognet::eval
