#include "cognet/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <fmt/format.h>

#include "cognet/common/errors.hpp"
#include "cognet/train/box_masks.hpp"

namespace cognet::train {

namespace fs = std::filesystem;
using nlohmann::json;

void TrainConfig::validate() const
{
    model.validate();
    weights.validate();
    if (batch_size < 1) throw InvalidInput("batch size must be >= 1");
    if (steps < 1) throw InvalidInput("steps must be >= 1");
    if (checkpoint_interval < 1 || log_interval < 1) throw InvalidInput("intervals must be >= 1");
    if (learning_rate <= 0) throw InvalidInput("learning rate must be positive");
    if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1) throw InvalidInput("moment coefficients must lie in [0, 1)");
    if (lambda_gp < 0) throw InvalidInput("gradient penalty weight must be nonnegative");
    if (ema_decay < 0 || ema_decay >= 1) throw InvalidInput("EMA decay must lie in [0, 1)");
    if (filter.min_frac < 0 || filter.min_frac > filter.max_frac || filter.max_frac > 1)
        throw InvalidInput("hole area limits must satisfy 0 <= min <= max <= 1");
}

json TrainConfig::to_json() const
{
    return {{"data_dir", data_dir.string()},
            {"out_dir", out_dir.string()},
            {"extractor_path", extractor_path.string()},
            {"resume_from", resume_from.string()},
            {"model", model.to_json()},
            {"weights", {{"perceptual", weights.perceptual}, {"gan", weights.gan}, {"cls", weights.cls}}},
            {"gan_variant", gan_variant == losses::GanVariant::Wasserstein ? "wgan-gp" : "non-saturating"},
            {"lambda_gp", lambda_gp},
            {"learning_rate", learning_rate},
            {"beta1", beta1},
            {"beta2", beta2},
            {"batch_size", batch_size},
            {"steps", steps},
            {"checkpoint_interval", checkpoint_interval},
            {"log_interval", log_interval},
            {"seed", seed},
            {"object_data", object_data},
            {"use_ema", use_ema},
            {"ema_decay", ema_decay},
            {"float64", float64},
            {"filter", {{"min_frac", filter.min_frac}, {"max_frac", filter.max_frac}, {"border", filter.border}}},
            {"extractor", {{"steps", extractor.steps}, {"batch_size", extractor.batch_size},
                           {"learning_rate", extractor.learning_rate}, {"seed", extractor.seed}}}};
}

TrainConfig TrainConfig::from_json(const json& j)
{
    TrainConfig c;
    try {
        c.data_dir = j.at("data_dir").get<std::string>();
        c.out_dir = j.at("out_dir").get<std::string>();
        c.extractor_path = j.value("extractor_path", "");
        c.resume_from = j.value("resume_from", "");
        c.model = model::ModelConfig::from_json(j.at("model"));
        c.weights = {j.at("weights").at("perceptual"), j.at("weights").at("gan"), j.at("weights").at("cls")};
        c.gan_variant = j.at("gan_variant") == "wgan-gp" ? losses::GanVariant::Wasserstein
                                                         : losses::GanVariant::NonSaturating;
        c.lambda_gp = j.at("lambda_gp");
        c.learning_rate = j.at("learning_rate");
        c.beta1 = j.at("beta1");
        c.beta2 = j.at("beta2");
        c.batch_size = j.at("batch_size");
        c.steps = j.at("steps");
        c.checkpoint_interval = j.at("checkpoint_interval");
        c.log_interval = j.at("log_interval");
        c.seed = j.at("seed");
        c.object_data = j.at("object_data");
        c.use_ema = j.at("use_ema");
        c.ema_decay = j.at("ema_decay");
        c.float64 = j.at("float64");
        c.filter = {j.at("filter").at("min_frac"), j.at("filter").at("max_frac"), j.at("filter").at("border")};
        const auto& e = j.at("extractor");
        c.extractor = {e.at("steps"), e.at("batch_size"), e.at("learning_rate"), e.at("seed")};
    } catch (const json::exception& e) {
        throw ParseError(fmt::format("train config: {}", e.what()));
    }
    return c;
}

json StepMetrics::to_json() const
{
    json j{{"step", step}, {"L_perc", perceptual}, {"L_g", gan_g}, {"L_d", gan_d}, {"gp", gradient_penalty},
           {"total_g", total_g}};
    if (class_loss) j["L_c"] = *class_loss;
    return j;
}

namespace {

std::unique_ptr<torch::optim::Adam> make_adam(const std::vector<torch::Tensor>& params, const TrainConfig& cfg)
{
    return std::make_unique<torch::optim::Adam>(
        params, torch::optim::AdamOptions(cfg.learning_rate).betas({cfg.beta1, cfg.beta2}));
}

void save_moments(const torch::nn::Module& module, const torch::optim::Adam& opt, const std::string& prefix,
                  model::TensorMap& out)
{
    const auto& state = opt.state();
    for (const auto& p : module.named_parameters()) {
        const auto it = state.find(p.value().unsafeGetTensorImpl());
        if (it == state.end()) continue;
        const auto& s = static_cast<const torch::optim::AdamParamState&>(*it->second);
        const auto key = prefix + "." + p.key();
        out[key + ".exp_avg"] = s.exp_avg().detach().clone();
        out[key + ".exp_avg_sq"] = s.exp_avg_sq().detach().clone();
        out[key + ".step"] = torch::tensor(s.step(), torch::kInt64);
    }
}

void load_moments(const torch::nn::Module& module, torch::optim::Adam& opt, const std::string& prefix,
                  const model::TensorMap& in)
{
    for (const auto& p : module.named_parameters()) {
        const auto key = prefix + "." + p.key();
        const auto avg = in.find(key + ".exp_avg");
        if (avg == in.end()) continue;
        auto s = std::make_unique<torch::optim::AdamParamState>();
        s->exp_avg(avg->second.to(p.value().dtype()).clone());
        s->exp_avg_sq(in.at(key + ".exp_avg_sq").to(p.value().dtype()).clone());
        s->step(in.at(key + ".step").item<int64_t>());
        opt.state()[p.value().unsafeGetTensorImpl()] = std::move(s);
    }
}

void set_requires_grad(torch::nn::Module& m, bool on)
{
    for (auto& p : m.parameters()) p.set_requires_grad(on);
}

bool finite(const torch::Tensor& t)
{
    return std::isfinite(t.item<double>());
}

}  // namespace

TrainState make_train_state(const TrainConfig& cfg)
{
    cfg.validate();
    torch::manual_seed(cfg.seed);
    TrainState s;
    s.generator = model::CogNet(cfg.model);
    s.discriminator = model::Discriminator(cfg.model);
    s.generator->to(cfg.dtype());
    s.discriminator->to(cfg.dtype());
    if (cfg.use_ema) {
        s.generator_ema = model::CogNet(cfg.model);
        s.generator_ema->to(cfg.dtype());
        model::load_named_tensors(*s.generator_ema, model::named_tensors(*s.generator));
        set_requires_grad(*s.generator_ema, false);
    }
    s.g_opt = make_adam(s.generator->parameters(), cfg);
    s.d_opt = make_adam(s.discriminator->parameters(), cfg);
    s.rng = derive_rng(cfg.seed, 0x7A1E);
    return s;
}

model::Checkpoint to_checkpoint(const TrainState& state, const TrainConfig& cfg)
{
    model::Checkpoint ck;
    ck.model = cfg.model;
    for (auto& [k, v] : model::named_tensors(*state.generator, "generator")) ck.params[k] = v.detach().clone();
    for (auto& [k, v] : model::named_tensors(*state.discriminator, "discriminator")) ck.params[k] = v.detach().clone();
    if (state.generator_ema)
        for (auto& [k, v] : model::named_tensors(*state.generator_ema, "generator_ema")) ck.params[k] = v.detach().clone();
    save_moments(*state.generator, *state.g_opt, "generator", ck.optimizer);
    save_moments(*state.discriminator, *state.d_opt, "discriminator", ck.optimizer);
    ck.metadata["step"] = state.step;
    ck.metadata["rng_state"] = serialize_rng(state.rng);
    ck.metadata["train_config"] = cfg.to_json();
    return ck;
}

TrainState from_checkpoint(const model::Checkpoint& ckpt, const TrainConfig& cfg)
{
    TrainConfig c = cfg;
    c.model = ckpt.model;
    TrainState s = make_train_state(c);
    model::load_named_tensors(*s.generator, ckpt.params, "generator");
    model::load_named_tensors(*s.discriminator, ckpt.params, "discriminator");
    if (s.generator_ema) {
        const bool has_ema = ckpt.params.count("generator_ema.decoder.constant") > 0;
        model::load_named_tensors(*s.generator_ema, ckpt.params, has_ema ? "generator_ema" : "generator");
    }
    load_moments(*s.generator, *s.g_opt, "generator", ckpt.optimizer);
    load_moments(*s.discriminator, *s.d_opt, "discriminator", ckpt.optimizer);
    try {
        s.step = ckpt.metadata.at("step").get<int64_t>();
        s.rng = deserialize_rng(ckpt.metadata.at("rng_state").get<std::string>());
    } catch (const json::exception& e) {
        throw ParseError(fmt::format("checkpoint metadata: {}", e.what()));
    }
    return s;
}

TrainState clone_state(const TrainState& state, const TrainConfig& cfg)
{
    return from_checkpoint(to_checkpoint(state, cfg), cfg);
}

CriticLosses critic_update(const dataprep::Batch& batch, const torch::Tensor& fake, const torch::Tensor& alpha,
                           TrainState& state, const TrainConfig& cfg)
{
    auto& D = state.discriminator;
    set_requires_grad(*D, true);
    state.d_opt->zero_grad();
    auto d_real = D(batch.target);
    auto d_fake = D(fake.detach());
    CriticLosses r;
    r.adversarial = losses::gan_loss_d(d_real, d_fake, cfg.gan_variant);
    r.penalty = torch::zeros({}, r.adversarial.options());
    if (cfg.gan_variant == losses::GanVariant::Wasserstein)
        r.penalty = losses::gradient_penalty([&](const torch::Tensor& x) { return D(x); }, batch.target, fake, alpha);
    auto total = r.adversarial + cfg.lambda_gp * r.penalty;
    if (!finite(total)) throw NumericalError(fmt::format("critic loss is non-finite at step {}", state.step + 1));
    total.backward();
    state.d_opt->step();
    return r;
}

GeneratorLosses generator_update(const dataprep::Batch& batch, const model::ForwardOutput& out, TrainState& state,
                                 const TrainConfig& cfg, losses::FeatureExtractor& extractor)
{
    auto& D = state.discriminator;
    // The critic is held fixed.
    set_requires_grad(*D, false);
    state.g_opt->zero_grad();
    GeneratorLosses r;
    r.parts.gan = losses::gan_loss_g(D(out.composite), cfg.gan_variant);
    r.parts.perceptual = losses::perceptual_loss(out.composite, batch.target, extractor);
    if (cfg.model.use_pce) r.parts.cls = losses::class_loss(out.prediction.probabilities, batch.one_hot);
    if (state.step + 1 == cfg.inject_nan_at_step)
        r.parts.perceptual = r.parts.perceptual * std::numeric_limits<double>::quiet_NaN();
    r.total = losses::total_generator_loss(r.parts, cfg.weights);
    if (!finite(r.total)) {
        set_requires_grad(*D, true);
        throw NumericalError(fmt::format("generator loss is non-finite at step {}", state.step + 1));
    }
    r.total.backward();
    state.g_opt->step();
    set_requires_grad(*D, true);
    return r;
}

StepMetrics train_step(const dataprep::Batch& input, TrainState& state, const TrainConfig& cfg,
                       losses::FeatureExtractor& extractor)
{
    if (input.size() < 1) throw InvalidInput("train_step needs a nonempty batch");
    auto batch = input.to(cfg.dtype());
    const int64_t n = batch.size();
    if (!cfg.object_data) batch = random_box_masks(batch, state.rng, cfg.filter);
    auto z = randn(state.rng, {n, cfg.model.z_dim}, cfg.dtype());
    auto alpha = rand_uniform(state.rng, {n}, cfg.dtype());

    state.generator->train();
    state.discriminator->train();
    auto out = state.generator->forward(batch.masked, batch.hole, z, {model::Mode::Train}, batch.one_hot);
    const auto critic = critic_update(batch, out.composite, alpha, state, cfg);
    const auto gen = generator_update(batch, out, state, cfg, extractor);

    if (state.generator_ema) {
        torch::NoGradGuard guard;
        auto src = state.generator->parameters();
        auto dst = state.generator_ema->parameters();
        const double decay = ema_decay_at(state.step, cfg.ema_decay);
        for (size_t i = 0; i < src.size(); ++i) dst[i].mul_(decay).add_(src[i].detach(), 1.0 - decay);
    }

    ++state.step;
    StepMetrics m;
    m.step = state.step;
    if (gen.parts.cls.defined()) m.class_loss = gen.parts.cls.item<double>();
    m.perceptual = gen.parts.perceptual.item<double>();
    m.gan_g = gen.parts.gan.item<double>();
    m.gan_d = critic.adversarial.item<double>();
    m.gradient_penalty = critic.penalty.item<double>();
    m.total_g = gen.total.item<double>();
    return m;
}

double ema_decay_at(int64_t step, double decay)
{
    const double t = static_cast<double>(step);
    return std::min(decay, (1.0 + t) / (10.0 + t));
}

std::vector<int64_t> batch_indices(int64_t step, int64_t batch_size, int64_t dataset_size, uint64_t seed)
{
    if (dataset_size < 1) throw InvalidInput("empty dataset");
    std::vector<int64_t> out;
    std::vector<int64_t> perm;
    int64_t cached_epoch = -1;
    for (int64_t k = 0; k < batch_size; ++k) {
        const int64_t pos = step * batch_size + k;
        const int64_t epoch = pos / dataset_size;
        if (epoch != cached_epoch) {
            perm.resize(static_cast<size_t>(dataset_size));
            std::iota(perm.begin(), perm.end(), 0);
            Rng rng = derive_rng(seed, 0xB47C000000ULL + static_cast<uint64_t>(epoch));
            std::shuffle(perm.begin(), perm.end(), rng);
            cached_epoch = epoch;
        }
        out.push_back(perm[static_cast<size_t>(pos % dataset_size)]);
    }
    return out;
}

std::shared_ptr<losses::TrunkExtractor> resolve_extractor(const TrainConfig& cfg, const dataprep::Dataset& ds)
{
    std::shared_ptr<losses::TrunkExtractor> fx;
    if (!cfg.extractor_path.empty()) {
        fx = losses::TrunkExtractor::load(cfg.extractor_path);
    } else if (!cfg.out_dir.empty() && fs::exists(cfg.out_dir / "extractor.pt")) {
        fx = losses::TrunkExtractor::load(cfg.out_dir / "extractor.pt");
    } else {
        fx = losses::train_extractor(ds.samples, ds.num_classes(), cfg.extractor);
        if (!cfg.out_dir.empty()) fx->save(cfg.out_dir / "extractor.pt");
    }
    fx->to(cfg.dtype());
    return fx;
}

FitResult fit(const TrainConfig& base)
{
    TrainConfig cfg = base;
    const auto ds = dataprep::load_dataset(cfg.data_dir, cfg.filter);
    if (ds.samples.empty()) throw InvalidInput(fmt::format("no usable samples in {}", cfg.data_dir.string()));
    cfg.model.num_classes = ds.num_classes();
    cfg.model.image_size = ds.samples.front().target.height();
    cfg.validate();

    std::error_code ec;
    fs::create_directories(cfg.out_dir / "checkpoints", ec);
    if (ec) throw IoError(fmt::format("cannot create {}: {}", cfg.out_dir.string(), ec.message()));
    {
        std::ofstream os(cfg.out_dir / "train_config.json");
        if (!os) throw IoError(fmt::format("cannot write into {}", cfg.out_dir.string()));
        os << cfg.to_json().dump(1) << "\n";
    }

    auto fx = resolve_extractor(cfg, ds);
    TrainState state = cfg.resume_from.empty() ? make_train_state(cfg)
                                               : from_checkpoint(model::load_checkpoint(cfg.resume_from), cfg);

    json categories = json::array();
    for (const auto& c : ds.categories) categories.push_back({{"id", c.id}, {"name", c.name}});

    auto save = [&](const fs::path& dir) {
        auto ck = to_checkpoint(state, cfg);
        ck.metadata["categories"] = categories;
        model::save_checkpoint(dir, ck);
    };

    std::ofstream log(cfg.out_dir / "train_log.ndjson", cfg.resume_from.empty() ? std::ios::trunc : std::ios::app);
    if (!log) throw IoError("cannot open train_log.ndjson");

    FitResult result;
    fs::path last_good = cfg.resume_from;
    const auto n = static_cast<int64_t>(ds.samples.size());
    while (state.step < cfg.steps) {
        const auto idx = batch_indices(state.step, cfg.batch_size, n, cfg.seed);
        const auto batch = dataprep::make_batch(ds.samples, idx);
        try {
            result.last = train_step(batch, state, cfg, *fx);
        } catch (const NumericalError& e) {
            throw NumericalError(e.what(), last_good.string());
        }
        if (state.step % cfg.log_interval == 0 || state.step == cfg.steps) log << result.last.to_json().dump() << std::endl;
        if (state.step % cfg.checkpoint_interval == 0) {
            const auto dir = cfg.out_dir / "checkpoints" / fmt::format("step_{:06d}", state.step);
            save(dir);
            result.checkpoints.push_back(dir);
            last_good = dir;
        }
    }
    result.final_checkpoint = cfg.out_dir / "final";
    save(result.final_checkpoint);
    return result;
}

}  // namespace cognet::train
