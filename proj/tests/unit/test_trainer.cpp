#include <doctest.h>

#include <boost/math/distributions/chi_squared.hpp>

#include <fstream>
#include <map>
#include <set>

#include "cognet/common/errors.hpp"
#include "cognet/dataprep/dataset.hpp"
#include "cognet/dataprep/shapesworld.hpp"
#include "cognet/train/box_masks.hpp"
#include "cognet/train/trainer.hpp"
#include "helpers.hpp"

using namespace cognet;
using namespace cognet::train;

namespace {

// 16x16 ShapesWorld with two classes, written once per process.
const std::filesystem::path& tiny_data_dir()
{
    static testing::TempDir dir("trainer_data");
    static bool done = false;
    if (!done) {
        dataprep::ShapesWorldConfig sw;
        sw.canvas = 16;
        sw.num_classes = 2;
        sw.seed = 5;
        dataprep::generate_shapesworld(sw, 12, dir.path);
        done = true;
    }
    return dir.path;
}

TrainConfig tiny_config(const std::filesystem::path& out)
{
    TrainConfig c;
    c.model = model::ModelConfig::micro();
    c.data_dir = tiny_data_dir();
    c.out_dir = out;
    c.batch_size = 4;
    c.steps = 4;
    c.checkpoint_interval = 1000;
    c.seed = 3;
    c.float64 = true;
    c.extractor.steps = 5;
    c.extractor.batch_size = 4;
    return c;
}

std::shared_ptr<losses::TrunkExtractor> random_extractor(int64_t classes)
{
    torch::manual_seed(17);
    auto fx = std::make_shared<losses::TrunkExtractor>(losses::ShapesClassifier(classes, std::vector<int64_t>{4, 6}));
    fx->to(torch::kFloat64);
    return fx;
}

dataprep::Batch tiny_batch()
{
    const auto ds = dataprep::load_dataset(tiny_data_dir());
    REQUIRE(ds.samples.size() >= 4);
    return dataprep::make_batch(ds.samples, std::vector<int64_t>{0, 1, 2, 3});
}

std::map<std::string, torch::Tensor> snapshot(const torch::nn::Module& m)
{
    std::map<std::string, torch::Tensor> out;
    for (const auto& p : m.named_parameters()) out[p.key()] = p.value().detach().clone();
    return out;
}

bool same_params(const torch::nn::Module& m, const std::map<std::string, torch::Tensor>& snap)
{
    for (const auto& p : m.named_parameters())
        if (!testing::bit_equal(p.value().detach(), snap.at(p.key()))) return false;
    return true;
}

}  // namespace

TEST_CASE("sample_box respects area limits, border and aspect")
{
    dataprep::FilterConfig f{0.02, 0.5, 1};
    Rng rng = derive_rng(1, 2);
    for (double area : {1.0, 10.0, 50.0, 100.0, 200.0, 500.0}) {
        for (int k = 0; k < 50; ++k) {
            const auto b = sample_box(area, 32, 32, f, rng);
            const double a = static_cast<double>(b.height * b.width);
            CHECK(a >= std::ceil(0.02 * 1024));
            CHECK(a <= std::floor(0.5 * 1024));
            CHECK(b.top >= 1);
            CHECK(b.left >= 1);
            CHECK(b.top + b.height <= 31);
            CHECK(b.left + b.width <= 31);
        }
    }
    CHECK_THROWS_AS(place_box(31, 4, 32, 32, 1, rng), InvalidInput);
}

TEST_CASE("place_box is uniform over valid placements")
{
    // 4x4 box in a 10x10 image with border 1: tops and lefts in [1, 5], 25 cells.
    Rng rng = derive_rng(9, 9);
    std::vector<double> counts(25, 0.0);
    const int draws = 10000;
    for (int i = 0; i < draws; ++i) {
        const auto b = place_box(4, 4, 10, 10, 1, rng);
        REQUIRE(b.top >= 1);
        REQUIRE(b.top <= 5);
        REQUIRE(b.left >= 1);
        REQUIRE(b.left <= 5);
        counts[static_cast<size_t>((b.top - 1) * 5 + (b.left - 1))] += 1;
    }
    const double expected = draws / 25.0;
    double chi2 = 0;
    for (double c : counts) chi2 += (c - expected) * (c - expected) / expected;
    boost::math::chi_squared dist(24);
    const double p = 1.0 - boost::math::cdf(dist, chi2);
    CHECK(p > 0.01);
}

TEST_CASE("random_box_masks keeps categories and re-cuts the image")
{
    auto batch = tiny_batch();
    Rng a = derive_rng(4, 4), b = derive_rng(4, 4);
    auto x = random_box_masks(batch, a);
    auto y = random_box_masks(batch, b);
    CHECK(testing::bit_equal(x.hole, y.hole));
    CHECK(torch::equal(x.category, batch.category));
    auto keep = (x.hole < 0.5).expand_as(x.target);
    CHECK(torch::equal(x.masked.masked_select(keep), x.target.masked_select(keep)));
    CHECK(x.masked.masked_select(~keep).abs().max().item<double>() == 0.0);
    for (int64_t i = 0; i < batch.size(); ++i) {
        // Each hole is a single solid rectangle.
        auto rows = x.hole[i][0].sum(1).nonzero();
        auto cols = x.hole[i][0].sum(0).nonzero();
        const auto hgt = rows.size(0), wid = cols.size(0);
        CHECK(x.hole[i].sum().item<double>() == static_cast<double>(hgt * wid));
    }
}

TEST_CASE("batch_indices: epoch permutations cover the dataset")
{
    std::multiset<int64_t> seen;
    for (int64_t s = 0; s < 5; ++s)
        for (auto i : batch_indices(s, 4, 20, 7)) seen.insert(i);
    CHECK(seen.size() == 20);
    for (int64_t i = 0; i < 20; ++i) CHECK(seen.count(i) == 1);
    CHECK(batch_indices(3, 4, 20, 7) == batch_indices(3, 4, 20, 7));
    CHECK(batch_indices(0, 20, 20, 7) != batch_indices(5, 20, 20, 7));
    // Batches straddling an epoch boundary.
    CHECK(batch_indices(2, 8, 20, 1).size() == 8);
    CHECK_THROWS_AS(batch_indices(0, 4, 0, 1), InvalidInput);
}

TEST_CASE("TrainConfig JSON round trip and validation")
{
    testing::TempDir tmp("cfg");
    auto c = tiny_config(tmp.path);
    c.gan_variant = losses::GanVariant::NonSaturating;
    c.weights.cls = 0.5;
    c.use_ema = false;
    auto back = TrainConfig::from_json(c.to_json());
    CHECK(back.to_json() == c.to_json());
    c.learning_rate = -1;
    CHECK_THROWS_AS(c.validate(), InvalidInput);
}

TEST_CASE("train_step is deterministic and finite")
{
    testing::TempDir tmp("step");
    auto cfg = tiny_config(tmp.path);
    auto batch = tiny_batch();
    auto fx = random_extractor(2);
    auto s1 = make_train_state(cfg);
    auto s2 = make_train_state(cfg);
    auto m1 = train_step(batch, s1, cfg, *fx);
    auto m2 = train_step(batch, s2, cfg, *fx);
    CHECK(m1.to_json() == m2.to_json());
    CHECK(std::isfinite(m1.total_g));
    CHECK(m1.step == 1);
    REQUIRE(m1.class_loss.has_value());
    CHECK(*m1.class_loss >= 0.0);
    CHECK(m1.gradient_penalty >= 0.0);
    const auto a = model::named_tensors(*s1.generator), b = model::named_tensors(*s2.generator);
    for (const auto& [k, v] : a) CHECK(testing::bit_equal(v, b.at(k)));
}

TEST_CASE("critic and generator updates leave each other's parameters untouched")
{
    testing::TempDir tmp("iso");
    auto cfg = tiny_config(tmp.path);
    cfg.use_ema = false;
    auto batch = tiny_batch().to(torch::kFloat64);
    auto fx = random_extractor(2);
    auto s = make_train_state(cfg);
    Rng rng = derive_rng(1, 1);
    auto z = randn(rng, {batch.size(), cfg.model.z_dim}, torch::kFloat64);
    auto alpha = rand_uniform(rng, {batch.size()}, torch::kFloat64);
    auto out = s.generator->forward(batch.masked, batch.hole, z, {model::Mode::Train}, batch.one_hot);

    const auto g0 = snapshot(*s.generator), d0 = snapshot(*s.discriminator);
    critic_update(batch, out.composite, alpha, s, cfg);
    CHECK(same_params(*s.generator, g0));
    CHECK_FALSE(same_params(*s.discriminator, d0));

    const auto g1 = snapshot(*s.generator), d1 = snapshot(*s.discriminator);
    generator_update(batch, out, s, cfg, *fx);
    CHECK(same_params(*s.discriminator, d1));
    CHECK_FALSE(same_params(*s.generator, g1));
    for (const auto& p : s.discriminator->parameters()) CHECK(p.requires_grad());
}

TEST_CASE("disabling the class embedding drops the class loss")
{
    testing::TempDir tmp("nopce");
    auto cfg = tiny_config(tmp.path);
    cfg.model.use_pce = false;
    cfg.model.use_top_down = false;
    auto s = make_train_state(cfg);
    auto fx = random_extractor(2);
    auto m = train_step(tiny_batch(), s, cfg, *fx);
    CHECK_FALSE(m.class_loss.has_value());
    CHECK_FALSE(m.to_json().contains("L_c"));
}

TEST_CASE("fit: checkpoints, resume equivalence and fault injection")
{
    testing::TempDir tmp("fit");
    auto cfg = tiny_config(tmp / "a");
    cfg.steps = 6;
    cfg.checkpoint_interval = 3;
    auto full = fit(cfg);
    REQUIRE(full.checkpoints.size() == 2);
    CHECK(std::filesystem::exists(full.final_checkpoint / "params.pt"));
    CHECK(std::filesystem::exists(full.final_checkpoint / "optimizer.pt"));
    CHECK(std::filesystem::exists(full.final_checkpoint / "metadata.json"));
    CHECK(std::filesystem::exists(tmp / "a" / "train_log.ndjson"));

    auto half = tiny_config(tmp / "b");
    half.steps = 6;
    half.checkpoint_interval = 1000;
    half.extractor_path = tmp / "a" / "extractor.pt";
    half.resume_from = full.checkpoints.front();
    auto resumed = fit(half);
    const auto x = model::load_checkpoint(full.final_checkpoint);
    const auto y = model::load_checkpoint(resumed.final_checkpoint);
    CHECK(y.metadata.at("step").get<int64_t>() == 6);
    for (const auto& [k, v] : x.params) {
        INFO(k);
        CHECK(testing::bit_equal(v, y.params.at(k)));
    }
    CHECK(x.metadata.at("rng_state") == y.metadata.at("rng_state"));

    auto bad = tiny_config(tmp / "c");
    bad.steps = 6;
    bad.checkpoint_interval = 2;
    bad.extractor_path = tmp / "a" / "extractor.pt";
    bad.inject_nan_at_step = 5;
    try {
        fit(bad);
        FAIL("expected NumericalError");
    } catch (const NumericalError& e) {
        CHECK(std::filesystem::path(e.last_good_checkpoint).filename() == "step_000004");
    }
}

TEST_CASE("EMA decay warms up and tracks the trained weights")
{
    CHECK(ema_decay_at(0, 0.999) == doctest::Approx(0.1));
    CHECK(ema_decay_at(100000, 0.999) == 0.999);
    for (int64_t t = 0; t < 50; ++t) CHECK(ema_decay_at(t + 1, 0.999) >= ema_decay_at(t, 0.999));

    testing::TempDir tmp("ema");
    auto cfg = tiny_config(tmp.path);
    auto s = make_train_state(cfg);
    auto fx = random_extractor(2);
    const auto before = snapshot(*s.generator_ema);
    train_step(tiny_batch(), s, cfg, *fx);
    const auto trained = snapshot(*s.generator);
    const double d = ema_decay_at(0, cfg.ema_decay);
    for (const auto& p : s.generator_ema->named_parameters())
        CHECK(testing::max_abs(p.value(), d * before.at(p.key()) + (1 - d) * trained.at(p.key())) <= 1e-12);
}
