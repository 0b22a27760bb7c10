// numpy-facing bindings of the C++ core. Structured results cross the
// boundary as JSON text and are decoded on the Python side.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <torch/torch.h>

#include "cognet/common/errors.hpp"
#include "cognet/common/image.hpp"
#include "cognet/common/rng.hpp"
#include "cognet/dataprep/dataset.hpp"
#include "cognet/dataprep/shapesworld.hpp"
#include "cognet/eval/evaluate.hpp"
#include "cognet/eval/fid.hpp"
#include "cognet/losses/losses.hpp"
#include "cognet/model/checkpoint.hpp"
#include "cognet/model/class_embedding.hpp"
#include "cognet/model/sc_adain.hpp"
#include "cognet/train/gradcheck.hpp"
#include "cognet/train/trainer.hpp"

namespace py = pybind11;
namespace fs = std::filesystem;
using namespace cognet;

namespace {

using F64Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

torch::Tensor to_tensor(const F64Array& a)
{
    std::vector<int64_t> shape(a.shape(), a.shape() + a.ndim());
    return torch::from_blob(const_cast<double*>(a.data()), shape, torch::kFloat64).clone();
}

F64Array to_array(const torch::Tensor& t)
{
    auto c = t.detach().to(torch::kFloat64).contiguous();
    std::vector<py::ssize_t> shape(c.sizes().begin(), c.sizes().end());
    F64Array out(shape);
    std::memcpy(out.mutable_data(), c.data_ptr<double>(), sizeof(double) * static_cast<size_t>(c.numel()));
    return out;
}

py::array_t<uint8_t> to_u8_image(const torch::Tensor& chw)
{
    auto hwc = unit_to_u8(chw).contiguous();
    py::array_t<uint8_t> out({hwc.size(0), hwc.size(1), hwc.size(2)});
    std::memcpy(out.mutable_data(), hwc.data_ptr<uint8_t>(), static_cast<size_t>(hwc.numel()));
    return out;
}

Eigen::VectorXd to_vector(const F64Array& a)
{
    if (a.ndim() != 1) throw InvalidInput("expected a 1-D array");
    return Eigen::Map<const Eigen::VectorXd>(a.data(), a.shape(0));
}

Eigen::MatrixXd to_matrix(const F64Array& a)
{
    if (a.ndim() != 2) throw InvalidInput("expected a 2-D array");
    Eigen::MatrixXd m(a.shape(0), a.shape(1));
    for (py::ssize_t i = 0; i < a.shape(0); ++i)
        for (py::ssize_t j = 0; j < a.shape(1); ++j) m(i, j) = a.at(i, j);
    return m;
}

std::string generate(const fs::path& out, int64_t n, uint64_t seed, int64_t canvas, int64_t classes, double rho,
                     const std::string& split)
{
    dataprep::ShapesWorldConfig cfg;
    cfg.seed = seed;
    cfg.canvas = canvas;
    cfg.num_classes = classes;
    cfg.rho = rho;
    cfg.split = split;
    cfg.validate();
    dataprep::generate_shapesworld(cfg, n, out);
    return cfg.to_json().dump();
}

std::string prepare(const fs::path& annotations, const fs::path& images, const fs::path& out, double min_frac,
                    double max_frac, int64_t border, std::optional<int64_t> size)
{
    const auto r = dataprep::prepare_coco(annotations, images, out, {min_frac, max_frac, border}, size);
    return nlohmann::json{{"images", r.images}, {"instances", r.instances}, {"shards", r.shards},
                          {"warnings", r.warnings}}
        .dump();
}

std::string train_json(const std::string& config)
{
    const auto cfg = train::TrainConfig::from_json(nlohmann::json::parse(config));
    py::gil_scoped_release release;
    const auto r = train::fit(cfg);
    auto j = r.last.to_json();
    j["final_checkpoint"] = r.final_checkpoint.string();
    return j.dump();
}

std::string evaluate_json(const fs::path& checkpoint, const fs::path& data, const fs::path& extractor,
                          const fs::path& out, int64_t max_images, uint64_t seed, bool identity, bool hard)
{
    eval::EvalConfig cfg;
    cfg.checkpoint = checkpoint;
    cfg.data_dir = data;
    cfg.extractor_path = extractor;
    cfg.out_dir = out;
    cfg.max_images = max_images;
    cfg.seed = seed;
    cfg.identity_model = identity;
    cfg.hard_prediction = hard;
    if (out.empty()) cfg.grid_rows = 0;
    py::gil_scoped_release release;
    return eval::evaluate(cfg).to_json().dump();
}

py::tuple inpaint(const fs::path& checkpoint, const py::array_t<uint8_t, py::array::c_style | py::array::forcecast>& image,
                  const py::array_t<uint8_t, py::array::c_style | py::array::forcecast>& mask, int64_t num_samples,
                  uint64_t seed, bool hard, bool use_ema)
{
    if (image.ndim() != 3 || image.shape(2) != 3) throw InvalidInput("image must be H x W x 3 uint8");
    if (mask.ndim() != 2 || mask.shape(0) != image.shape(0) || mask.shape(1) != image.shape(1))
        throw InvalidInput("mask must be H x W and match the image");
    if (num_samples < 1) throw InvalidInput("num_samples must be positive");
    auto g = model::load_generator(checkpoint, use_ema);
    g->eval();
    const int64_t h = image.shape(0), w = image.shape(1);
    if (h != g->config.image_size || w != g->config.image_size)
        throw InvalidInput("image size differs from the model resolution");
    auto hwc = torch::from_blob(const_cast<uint8_t*>(image.data()), {h, w, 3}, torch::kUInt8).clone();
    auto m = torch::from_blob(const_cast<uint8_t*>(mask.data()), {h, w}, torch::kUInt8).clone();
    const auto dtype = g->parameters().front().scalar_type();
    const auto hole = (m > 0).to(dtype).view({1, 1, h, w});
    const auto masked = u8_to_unit(hwc).to(dtype).unsqueeze(0) * (1.0 - hole);
    Rng rng = derive_rng(seed, 0x696e6672ULL);
    py::list samples;
    torch::Tensor probs;
    torch::NoGradGuard guard;
    for (int64_t k = 0; k < num_samples; ++k) {
        const auto r = g->forward(masked, hole, randn(rng, {1, g->config.z_dim}, dtype), {model::Mode::Inference, hard});
        samples.append(to_u8_image(r.composite[0].to(torch::kFloat32)));
        if (g->config.use_pce) probs = r.prediction.probabilities[0];
    }
    return py::make_tuple(samples, probs.defined() ? py::object(to_array(probs)) : py::object(py::none()));
}

}  // namespace

PYBIND11_MODULE(_cognet, m)
{
    m.doc() = "Contextual object inpainting core";

    py::register_exception<InvalidInput>(m, "InvalidInput", PyExc_ValueError);
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);
    py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

    m.def("generate_shapesworld", &generate, py::arg("out"), py::arg("n"), py::arg("seed") = 0,
          py::arg("canvas") = 64, py::arg("classes") = 4, py::arg("rho") = 1.0, py::arg("split") = "train");
    m.def("prepare_coco", &prepare, py::arg("annotations"), py::arg("images"), py::arg("out"),
          py::arg("min_frac") = 0.02, py::arg("max_frac") = 0.5, py::arg("border") = 1, py::arg("size") = py::none());

    m.def("sc_adain",
          [](const F64Array& x, const F64Array& g, const F64Array& b, const F64Array& sg, const F64Array& sb) {
              return to_array(model::sc_adain(to_tensor(x), to_tensor(g), to_tensor(b), to_tensor(sg), to_tensor(sb)));
          },
          py::arg("x"), py::arg("channel_gamma"), py::arg("channel_beta"), py::arg("spatial_gamma"),
          py::arg("spatial_beta"));
    m.def("semantic_map",
          [](const F64Array& probs, const F64Array& hole) {
              return to_array(model::make_semantic_map(to_tensor(probs), to_tensor(hole)));
          },
          py::arg("probabilities"), py::arg("hole"));
    m.def("class_loss",
          [](const F64Array& probs, const F64Array& one_hot) {
              return losses::class_loss(to_tensor(probs), to_tensor(one_hot)).item<double>();
          },
          py::arg("probabilities"), py::arg("one_hot"));

    m.def("feature_stats",
          [](const F64Array& features) {
              const auto s = eval::compute_stats(to_tensor(features));
              F64Array mean(s.dim()), cov({s.dim(), s.dim()});
              std::memcpy(mean.mutable_data(), s.mean.data(), sizeof(double) * static_cast<size_t>(s.dim()));
              for (int64_t i = 0; i < s.dim(); ++i)
                  for (int64_t j = 0; j < s.dim(); ++j) cov.mutable_at(i, j) = s.cov(i, j);
              return py::make_tuple(mean, cov);
          },
          py::arg("features"));
    m.def("frechet_distance",
          [](const F64Array& mean_a, const F64Array& cov_a, const F64Array& mean_b, const F64Array& cov_b) {
              eval::FeatureStats a, b;
              a.mean = to_vector(mean_a);
              a.cov = to_matrix(cov_a);
              b.mean = to_vector(mean_b);
              b.cov = to_matrix(cov_b);
              a.count = b.count = 2;
              return eval::frechet_distance(a, b);
          },
          py::arg("mean_a"), py::arg("cov_a"), py::arg("mean_b"), py::arg("cov_b"));

    m.def("_train", &train_json, py::arg("config_json"));
    m.def("_default_train_config", [] { return train::TrainConfig{}.to_json().dump(); });
    m.def("_evaluate", &evaluate_json, py::arg("checkpoint"), py::arg("data"), py::arg("extractor"), py::arg("out"),
          py::arg("max_images"), py::arg("seed"), py::arg("identity"), py::arg("hard"));
    m.def("inpaint", &inpaint, py::arg("checkpoint"), py::arg("image"), py::arg("mask"), py::arg("num_samples") = 1,
          py::arg("seed") = 0, py::arg("hard") = false, py::arg("use_ema") = true);
    m.def("_grad_check", [](uint64_t seed) {
        train::GradCheckOptions opts;
        opts.seed = seed;
        return train::grad_check(model::ModelConfig::micro(), opts).to_json().dump();
    }, py::arg("seed") = 0);
}
