#include "cognet/cli/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "cognet/common/errors.hpp"
#include "cognet/common/image.hpp"
#include "cognet/common/rng.hpp"
#include "cognet/dataprep/dataset.hpp"
#include "cognet/dataprep/shapesworld.hpp"
#include "cognet/eval/evaluate.hpp"
#include "cognet/losses/feature_extractor.hpp"
#include "cognet/model/checkpoint.hpp"
#include "cognet/train/gradcheck.hpp"
#include "cognet/train/trainer.hpp"

namespace cognet::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Context {
    fs::path workdir = ".";
    fs::path resolve(const fs::path& p) const { return p.empty() || p.is_absolute() ? p : workdir / p; }
};

void write_json(const fs::path& path, const json& j)
{
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

json read_json(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError(fmt::format("{}: {}", path.string(), e.what()));
    }
}

template <class T>
void take(const CLI::Option* opt, T& dst, const T& value)
{
    if (opt->count() > 0) dst = value;
}

// ---- prepare ---------------------------------------------------------------

struct PrepareArgs {
    fs::path annotations, images, out = "prepared";
    dataprep::FilterConfig filter;
    int64_t size = 0;
};

void add_prepare(CLI::App& app, PrepareArgs& a)
{
    auto* cmd = app.add_subcommand("prepare", "Build object-hole samples from a COCO-style annotation file");
    cmd->add_option("--annotations", a.annotations, "COCO instances JSON")->required();
    cmd->add_option("--images", a.images, "Directory holding the referenced images")->required();
    cmd->add_option("--out", a.out, "Output directory")->capture_default_str();
    cmd->add_option("--min-frac", a.filter.min_frac, "Minimum hole area fraction")
        ->capture_default_str()->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--max-frac", a.filter.max_frac, "Maximum hole area fraction")
        ->capture_default_str()->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--border", a.filter.border, "Minimum gap between bounding box and image edge")
        ->capture_default_str()->check(CLI::NonNegativeNumber);
    cmd->add_option("--size", a.size, "Resize images to SIZE x SIZE (0 keeps the original size)")
        ->capture_default_str()->check(CLI::NonNegativeNumber);
}

int cmd_prepare(const Context& ctx, const PrepareArgs& a)
{
    const auto out = ctx.resolve(a.out);
    std::optional<int64_t> size;
    if (a.size > 0) size = a.size;
    const auto report = dataprep::prepare_coco(ctx.resolve(a.annotations), ctx.resolve(a.images), out, a.filter, size);
    if (report.shards == 0) std::cerr << "warning: no instance passed the filter\n";
    std::cout << fmt::format("images: {}  instances: {}  shards: {}  warnings: {}\n", report.images,
                             report.instances, report.shards, report.warnings);
    return kExitOk;
}

// ---- shapesworld -------------------------------------------------------------

struct ShapesArgs {
    dataprep::ShapesWorldConfig cfg;
    int64_t n = 1000;
    fs::path out = "shapesworld";
};

void add_shapesworld(CLI::App& app, ShapesArgs& a)
{
    auto* cmd = app.add_subcommand("shapesworld", "Generate the procedural ShapesWorld dataset");
    cmd->add_option("--n", a.n, "Number of images")->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--seed", a.cfg.seed, "Random seed")->capture_default_str();
    cmd->add_option("--rho", a.cfg.rho, "Probability that the background family matches the category")
        ->capture_default_str()->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--classes", a.cfg.num_classes, "Number of shape categories")
        ->capture_default_str()->check(CLI::Range(int64_t{2}, dataprep::ShapesWorldConfig::kMaxClasses));
    cmd->add_option("--canvas", a.cfg.canvas, "Image side in pixels")->capture_default_str()->check(
        CLI::Range(int64_t{16}, int64_t{1024}));
    cmd->add_option("--split", a.cfg.split, "Split name recorded in the manifest")->capture_default_str();
    cmd->add_option("--out", a.out, "Output directory")->capture_default_str();
}

int cmd_shapesworld(const Context& ctx, const ShapesArgs& a)
{
    const auto out = ctx.resolve(a.out);
    const auto manifest = dataprep::generate_shapesworld(a.cfg, a.n, out);
    std::cout << fmt::format("wrote {} images to {}\n", manifest.images.size(), out.string());
    return kExitOk;
}

// ---- extractor ---------------------------------------------------------------

struct ExtractorArgs {
    fs::path data, out = "extractor.pt";
    losses::ClassifierTrainConfig cfg;
};

void add_extractor(CLI::App& app, ExtractorArgs& a)
{
    auto* cmd = app.add_subcommand("extractor", "Train the frozen feature extractor on complete images");
    cmd->add_option("--data", a.data, "Dataset directory")->required();
    cmd->add_option("--out", a.out, "Output archive")->capture_default_str();
    cmd->add_option("--steps", a.cfg.steps, "Optimizer steps")->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--batch-size", a.cfg.batch_size, "Batch size")->capture_default_str()->check(
        CLI::PositiveNumber);
    cmd->add_option("--lr", a.cfg.learning_rate, "Learning rate")->capture_default_str();
    cmd->add_option("--seed", a.cfg.seed, "Random seed")->capture_default_str();
}

int cmd_extractor(const Context& ctx, const ExtractorArgs& a)
{
    const auto ds = dataprep::load_dataset(ctx.resolve(a.data));
    double accuracy = 0.0;
    auto fx = losses::train_extractor(ds.samples, ds.num_classes(), a.cfg, &accuracy);
    const auto out = ctx.resolve(a.out);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    fx->save(out);
    std::cout << fmt::format("extractor: {}  training accuracy: {:.4f}\n", out.string(), accuracy);
    return kExitOk;
}

// ---- train -------------------------------------------------------------------

struct TrainArgs {
    train::TrainConfig cfg;
    fs::path config;
    std::string gan = "wgan-gp";
    bool no_pce = false, no_topdown = false, random_box = false, no_ema = false;
    std::map<std::string, CLI::Option*> opts;
};

void add_train(CLI::App& app, TrainArgs& a)
{
    auto* cmd = app.add_subcommand("train", "Train the inpainting generator and its critic");
    auto& c = a.cfg;
    auto& o = a.opts;
    cmd->add_option("--config", a.config, "JSON training config; explicit flags take precedence");
    o["data"] = cmd->add_option("--data", c.data_dir, "Training dataset directory");
    o["out"] = cmd->add_option("--out", c.out_dir, "Run directory");
    o["extractor"] = cmd->add_option("--extractor", c.extractor_path,
                                     "Perceptual backbone archive (trained from the data when absent)");
    o["resume"] = cmd->add_option("--resume", c.resume_from, "Checkpoint directory to continue from");
    o["steps"] = cmd->add_option("--steps", c.steps, "Total optimizer steps")->capture_default_str();
    o["batch"] = cmd->add_option("--batch-size", c.batch_size, "Batch size")->capture_default_str();
    o["lr"] = cmd->add_option("--lr", c.learning_rate, "Adam learning rate")->capture_default_str();
    o["beta1"] = cmd->add_option("--beta1", c.beta1, "Adam beta1")->capture_default_str();
    o["beta2"] = cmd->add_option("--beta2", c.beta2, "Adam beta2")->capture_default_str();
    o["seed"] = cmd->add_option("--seed", c.seed, "Random seed")->capture_default_str();
    o["ckpt"] = cmd->add_option("--checkpoint-interval", c.checkpoint_interval, "Steps between checkpoints")
                    ->capture_default_str();
    o["log"] = cmd->add_option("--log-interval", c.log_interval, "Steps between log lines")->capture_default_str();
    o["channels"] = cmd->add_option("--channels", c.model.channels, "Per-scale widths, coarse scales last")
                        ->capture_default_str()->delimiter(',');
    o["disc"] = cmd->add_option("--disc-channels", c.model.disc_channels, "Critic widths")
                    ->capture_default_str()->delimiter(',');
    o["z"] = cmd->add_option("--z-dim", c.model.z_dim, "Latent size")->capture_default_str();
    o["h"] = cmd->add_option("--h-dim", c.model.h_dim, "Class embedding size")->capture_default_str();
    o["mapped"] = cmd->add_option("--mapped-dim", c.model.mapped_dim, "Mapping network output size")
                      ->capture_default_str();
    o["w_perc"] = cmd->add_option("--w-perc", c.weights.perceptual, "Perceptual loss weight")->capture_default_str();
    o["w_gan"] = cmd->add_option("--w-gan", c.weights.gan, "Adversarial loss weight")->capture_default_str();
    o["w_cls"] = cmd->add_option("--w-cls", c.weights.cls, "Class loss weight")->capture_default_str();
    o["gp"] = cmd->add_option("--lambda-gp", c.lambda_gp, "Gradient penalty weight")->capture_default_str();
    o["gan"] = cmd->add_option("--gan", a.gan, "Adversarial objective")
                   ->capture_default_str()->check(CLI::IsMember({"wgan-gp", "ns"}));
    o["ema"] = cmd->add_option("--ema-decay", c.ema_decay, "Decay of the averaged generator")->capture_default_str();
    o["no_ema"] = cmd->add_flag("--no-ema", a.no_ema, "Disable the averaged generator");
    o["no_pce"] = cmd->add_flag("--no-pce", a.no_pce, "Disable the predictive class embedding and top-down stream");
    o["no_topdown"] = cmd->add_flag("--no-topdown", a.no_topdown, "Disable the top-down stream");
    o["random_box"] = cmd->add_flag("--random-box-masks", a.random_box, "Train with random rectangular holes");
    o["float64"] = cmd->add_flag("--float64", c.float64, "Train in 64-bit precision");
    o["nan"] = cmd->add_option("--inject-nan-at", c.inject_nan_at_step, "Fault injection: poison the loss at step")
                   ->capture_default_str();
}

train::TrainConfig resolve_train(const Context& ctx, const TrainArgs& a)
{
    train::TrainConfig cfg;
    if (!a.config.empty()) {
        json base = cfg.to_json();
        base.merge_patch(read_json(ctx.resolve(a.config)));
        cfg = train::TrainConfig::from_json(base);
    }
    const auto& c = a.cfg;
    const auto& o = a.opts;
    take(o.at("data"), cfg.data_dir, c.data_dir);
    take(o.at("out"), cfg.out_dir, c.out_dir);
    take(o.at("extractor"), cfg.extractor_path, c.extractor_path);
    take(o.at("resume"), cfg.resume_from, c.resume_from);
    take(o.at("steps"), cfg.steps, c.steps);
    take(o.at("batch"), cfg.batch_size, c.batch_size);
    take(o.at("lr"), cfg.learning_rate, c.learning_rate);
    take(o.at("beta1"), cfg.beta1, c.beta1);
    take(o.at("beta2"), cfg.beta2, c.beta2);
    take(o.at("seed"), cfg.seed, c.seed);
    take(o.at("ckpt"), cfg.checkpoint_interval, c.checkpoint_interval);
    take(o.at("log"), cfg.log_interval, c.log_interval);
    take(o.at("channels"), cfg.model.channels, c.model.channels);
    take(o.at("disc"), cfg.model.disc_channels, c.model.disc_channels);
    take(o.at("z"), cfg.model.z_dim, c.model.z_dim);
    take(o.at("h"), cfg.model.h_dim, c.model.h_dim);
    take(o.at("mapped"), cfg.model.mapped_dim, c.model.mapped_dim);
    take(o.at("w_perc"), cfg.weights.perceptual, c.weights.perceptual);
    take(o.at("w_gan"), cfg.weights.gan, c.weights.gan);
    take(o.at("w_cls"), cfg.weights.cls, c.weights.cls);
    take(o.at("gp"), cfg.lambda_gp, c.lambda_gp);
    take(o.at("ema"), cfg.ema_decay, c.ema_decay);
    take(o.at("float64"), cfg.float64, c.float64);
    take(o.at("nan"), cfg.inject_nan_at_step, c.inject_nan_at_step);
    if (o.at("gan")->count() > 0)
        cfg.gan_variant = a.gan == "ns" ? losses::GanVariant::NonSaturating : losses::GanVariant::Wasserstein;
    if (a.no_ema) cfg.use_ema = false;
    if (a.no_pce) {
        cfg.model.use_pce = false;
        cfg.model.use_top_down = false;
    }
    if (a.no_topdown) cfg.model.use_top_down = false;
    if (a.random_box) cfg.object_data = false;
    if (o.at("channels")->count() > 0 && o.at("disc")->count() == 0 && a.config.empty())
        cfg.model.disc_channels = cfg.model.channels;
    cfg.model.num_scales = static_cast<int64_t>(cfg.model.channels.size());

    if (cfg.data_dir.empty()) throw InvalidInput("train: --data is required");
    if (cfg.out_dir.empty()) throw InvalidInput("train: --out is required");
    cfg.data_dir = ctx.resolve(cfg.data_dir);
    cfg.out_dir = ctx.resolve(cfg.out_dir);
    cfg.extractor_path = ctx.resolve(cfg.extractor_path);
    cfg.resume_from = ctx.resolve(cfg.resume_from);
    cfg.validate();
    return cfg;
}

int cmd_train(const Context& ctx, const TrainArgs& a)
{
    const auto cfg = resolve_train(ctx, a);
    const auto result = train::fit(cfg);
    std::cout << fmt::format("trained to step {}  final checkpoint: {}\n", result.last.step,
                             result.final_checkpoint.string());
    std::cout << result.last.to_json().dump() << '\n';
    return kExitOk;
}

// ---- infer -------------------------------------------------------------------

struct InferArgs {
    fs::path checkpoint, image, mask, out = "samples";
    int64_t num_samples = 1;
    uint64_t seed = 0;
    bool hard = false, raw_weights = false;
};

void add_infer(CLI::App& app, InferArgs& a)
{
    auto* cmd = app.add_subcommand("infer", "Inpaint one image for several latent draws");
    cmd->add_option("--checkpoint", a.checkpoint, "Checkpoint directory")->required();
    cmd->add_option("--image", a.image, "Input image (PNG)")->required();
    cmd->add_option("--mask", a.mask, "Hole mask (PNG, white = hole)")->required();
    cmd->add_option("--out", a.out, "Output directory")->capture_default_str();
    cmd->add_option("--num-samples", a.num_samples, "Number of latent draws")
        ->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--seed", a.seed, "Random seed")->capture_default_str();
    cmd->add_flag("--hard", a.hard, "Use the argmax class instead of the predicted distribution");
    cmd->add_flag("--raw-weights", a.raw_weights, "Use the trained weights instead of their running average");
}

int cmd_infer(const Context& ctx, const InferArgs& a)
{
    json meta;
    auto g = model::load_generator(ctx.resolve(a.checkpoint), !a.raw_weights, &meta);
    g->eval();
    const auto image = load_rgb(ctx.resolve(a.image));
    const auto mask = load_mask(ctx.resolve(a.mask));
    const int64_t n = g->config.image_size;
    if (image.pixels.size(1) != n || image.pixels.size(2) != n)
        throw InvalidInput(fmt::format("infer: image must be {}x{}", n, n));
    if (mask.indicator.sizes() != image.pixels.sizes().slice(1))
        throw InvalidInput("infer: mask size differs from the image size");

    const auto dtype = g->parameters().front().scalar_type();
    const auto hole = mask.indicator.to(dtype).view({1, 1, n, n});
    const auto masked = image.pixels.to(dtype).unsqueeze(0) * (1.0 - hole);
    Rng rng = derive_rng(a.seed, 0x696e6672ULL);
    const auto out = ctx.resolve(a.out);
    fs::create_directories(out);
    torch::NoGradGuard guard;
    json predictions = json::array();
    for (int64_t k = 0; k < a.num_samples; ++k) {
        const auto z = randn(rng, {1, g->config.z_dim}, dtype);
        const auto r = g->forward(masked, hole, z, {model::Mode::Inference, a.hard});
        save_rgb(out / fmt::format("sample_{:03d}.png", k), r.composite[0].to(torch::kFloat32));
        if (g->config.use_pce) {
            const auto probs = r.prediction.probabilities[0].to(torch::kFloat64).contiguous();
            predictions.push_back(std::vector<double>(probs.data_ptr<double>(), probs.data_ptr<double>() + probs.numel()));
        }
    }
    write_json(out / "infer.json", {{"checkpoint", ctx.resolve(a.checkpoint).string()},
                                    {"num_samples", a.num_samples},
                                    {"seed", a.seed},
                                    {"class_probabilities", predictions}});
    std::cout << fmt::format("wrote {} samples to {}\n", a.num_samples, out.string());
    return kExitOk;
}

// ---- eval --------------------------------------------------------------------

struct EvalArgs {
    eval::EvalConfig cfg;
    bool raw_weights = false;
};

void add_eval(CLI::App& app, EvalArgs& a)
{
    auto& c = a.cfg;
    auto* cmd = app.add_subcommand("eval", "Frechet feature distance and perceptual proxy on a held-out split");
    cmd->add_option("--checkpoint", c.checkpoint, "Checkpoint directory");
    cmd->add_option("--data", c.data_dir, "Held-out dataset directory")->required();
    cmd->add_option("--extractor", c.extractor_path, "Frozen feature extractor archive");
    cmd->add_option("--out", c.out_dir, "Directory for report.json and grid.png");
    cmd->add_option("--max-images", c.max_images, "Images to evaluate (0 = all)")->capture_default_str();
    cmd->add_option("--batch-size", c.batch_size, "Batch size")->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--seed", c.seed, "Random seed")->capture_default_str();
    cmd->add_option("--grid-rows", c.grid_rows, "Rows of the sample grid (0 disables it)")->capture_default_str();
    cmd->add_option("--grid-samples", c.grid_samples, "Latent draws per grid row")->capture_default_str();
    cmd->add_flag("--hard", c.hard_prediction, "Use the argmax class instead of the predicted distribution");
    cmd->add_flag("--raw-weights", a.raw_weights, "Use the trained weights instead of their running average");
    cmd->add_flag("--identity", c.identity_model, "Evaluate the ground truth as if it were the output");
}

int cmd_eval(const Context& ctx, EvalArgs a)
{
    auto& c = a.cfg;
    c.checkpoint = ctx.resolve(c.checkpoint);
    c.data_dir = ctx.resolve(c.data_dir);
    c.extractor_path = ctx.resolve(c.extractor_path);
    c.out_dir = ctx.resolve(c.out_dir);
    c.use_ema = !a.raw_weights;
    const auto report = eval::evaluate(c);
    std::cout << report.table();
    return kExitOk;
}

// ---- gradcheck ---------------------------------------------------------------

struct GradArgs {
    train::GradCheckOptions opts;
    fs::path out;
};

void add_gradcheck(CLI::App& app, GradArgs& a)
{
    auto* cmd = app.add_subcommand("gradcheck", "Finite-difference gradient check on the micro configuration");
    cmd->add_option("--seed", a.opts.seed, "Random seed")->capture_default_str();
    cmd->add_option("--step", a.opts.step, "Central difference step")->capture_default_str();
    cmd->add_option("--coords", a.opts.coords_per_tensor, "Coordinates sampled per tensor")->capture_default_str();
    cmd->add_option("--out", a.out, "JSON report path");
}

int cmd_gradcheck(const Context& ctx, const GradArgs& a)
{
    const auto report = train::grad_check(model::ModelConfig::micro(), a.opts);
    for (const auto& g : report.groups)
        std::cout << fmt::format("{:<32} {:>12.3e} {:>6} {}\n", g.name, g.max_rel_error, g.coordinates,
                                 g.skipped ? "SKIP" : (g.passed() ? "PASS" : "FAIL"));
    if (!a.out.empty()) write_json(ctx.resolve(a.out), report.to_json());
    return report.passed() ? kExitOk : kExitNumerical;
}

}  // namespace

int run_cli(int argc, char** argv)
{
    CLI::App app{"Contextual object inpainting: data preparation, training and evaluation", "cognet"};
    app.require_subcommand(1);
    Context ctx;
    app.add_option("--workdir", ctx.workdir, "Root for relative paths")->capture_default_str();
    app.add_option("--threads", [](const CLI::results_t& r) {
        torch::set_num_threads(std::stoi(r.front()));
        return true;
    }, "Intra-op threads (default: library choice)");

    PrepareArgs prepare;
    ShapesArgs shapes;
    ExtractorArgs extractor;
    TrainArgs train_args;
    InferArgs infer;
    EvalArgs eval_args;
    GradArgs grad;
    add_prepare(app, prepare);
    add_shapesworld(app, shapes);
    add_extractor(app, extractor);
    add_train(app, train_args);
    add_infer(app, infer);
    add_eval(app, eval_args);
    add_gradcheck(app, grad);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitInput;
    }

    try {
        if (app.got_subcommand("prepare")) return cmd_prepare(ctx, prepare);
        if (app.got_subcommand("shapesworld")) return cmd_shapesworld(ctx, shapes);
        if (app.got_subcommand("extractor")) return cmd_extractor(ctx, extractor);
        if (app.got_subcommand("train")) return cmd_train(ctx, train_args);
        if (app.got_subcommand("infer")) return cmd_infer(ctx, infer);
        if (app.got_subcommand("eval")) return cmd_eval(ctx, eval_args);
        if (app.got_subcommand("gradcheck")) return cmd_gradcheck(ctx, grad);
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        if (!e.last_good_checkpoint.empty()) std::cerr << "last good checkpoint: " << e.last_good_checkpoint << '\n';
        return kExitNumerical;
    } catch (const InvalidInput& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInput;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInput;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInput;
    } catch (const c10::Error& e) {
        std::cerr << "error: " << e.what_without_backtrace() << '\n';
        return kExitInput;
    }
    return kExitInput;
}

}  // namespace cognet::cli
