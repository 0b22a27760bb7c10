#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <fstream>

#include "cognet/common/errors.hpp"
#include "cognet/common/image.hpp"
#include "cognet/common/rng.hpp"
#include "cognet/dataprep/shapesworld.hpp"
#include "cognet/eval/evaluate.hpp"
#include "cognet/eval/fid.hpp"
#include "cognet/eval/grid.hpp"
#include "helpers.hpp"

using namespace cognet;
using namespace cognet::eval;

namespace {

FeatureStats stats_of(Eigen::VectorXd mean, Eigen::MatrixXd cov)
{
    FeatureStats s;
    s.mean = std::move(mean);
    s.cov = std::move(cov);
    s.count = 100;
    return s;
}

Eigen::MatrixXd random_psd(int d, Rng& rng)
{
    std::normal_distribution<double> n;
    Eigen::MatrixXd a(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) a(i, j) = n(rng);
    return a * a.transpose() + 0.1 * Eigen::MatrixXd::Identity(d, d);
}

// Textbook form: trace term from the eigenvalues of the (non-symmetric) product.
double frechet_oracle(const FeatureStats& a, const FeatureStats& b)
{
    Eigen::MatrixXd prod = a.cov * b.cov;
    Eigen::EigenSolver<Eigen::MatrixXd> es(prod);
    double tr = 0;
    for (int i = 0; i < es.eigenvalues().size(); ++i) tr += std::sqrt(std::max(0.0, es.eigenvalues()(i).real()));
    return (a.mean - b.mean).squaredNorm() + a.cov.trace() + b.cov.trace() - 2 * tr;
}

}  // namespace

TEST_CASE("compute_stats: identical rows give zero covariance")
{
    auto f = torch::tensor({1.0, 2.0, 3.0}, torch::kFloat64).repeat({10, 1});
    auto s = compute_stats(f);
    CHECK(s.dim() == 3);
    CHECK(s.count == 10);
    CHECK(s.cov.cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(std::abs(s.mean(1) - 2.0) <= 1e-12);
}

TEST_CASE("compute_stats matches the unbiased covariance")
{
    torch::manual_seed(0);
    auto f = torch::randn({50, 4}, torch::kFloat64) * 3 + 1e4;
    auto s = compute_stats(f);
    auto c = f - f.mean(0, true);
    auto ref = torch::mm(c.t(), c) / 49.0;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) CHECK(std::abs(s.cov(i, j) - ref[i][j].item<double>()) <= 1e-8);
    CHECK_NOTHROW(s.validate());
    CHECK_THROWS_AS(compute_stats(f.slice(0, 0, 1)), InvalidInput);
}

TEST_CASE("extract_features pools every layer over positions")
{
    losses::IdentityExtractor fx;
    torch::manual_seed(1);
    auto img = torch::rand({7, 3, 8, 8}) * 2 - 1;
    auto f = extract_features(img, fx, 3);
    CHECK(f.sizes() == torch::IntArrayRef({7, 3}));
    CHECK(testing::max_abs(f, img.mean({2, 3})) <= 1e-6);
}

TEST_CASE("frechet_distance: closed forms")
{
    Rng rng = derive_rng(3, 3);
    const auto s = random_psd(3, rng);
    const auto a = stats_of(Eigen::Vector3d(1, 2, 3), s);
    CHECK(std::abs(frechet_distance(a, a)) <= 1e-8);

    Eigen::MatrixXd one(1, 1);
    one << 1.0;
    Eigen::MatrixXd four(1, 1);
    four << 4.0;
    Eigen::VectorXd m0(1), m1(1);
    m0 << 0.0;
    m1 << 1.0;
    CHECK(std::abs(frechet_distance(stats_of(m0, one), stats_of(m1, one)) - 1.0) <= 1e-10);
    CHECK(std::abs(frechet_distance(stats_of(m0, one), stats_of(m0, four)) - 1.0) <= 1e-10);
}

TEST_CASE("frechet_distance agrees with the non-symmetric eigenvalue oracle")
{
    Rng rng = derive_rng(4, 4);
    std::normal_distribution<double> n;
    for (int trial = 0; trial < 20; ++trial) {
        const auto a = stats_of(Eigen::Vector3d(n(rng), n(rng), n(rng)), random_psd(3, rng));
        const auto b = stats_of(Eigen::Vector3d(n(rng), n(rng), n(rng)), random_psd(3, rng));
        const double got = frechet_distance(a, b);
        const double want = frechet_oracle(a, b);
        CHECK(std::abs(got - want) <= 1e-8 * std::max(1.0, std::abs(want)));
        CHECK(std::abs(got - frechet_distance(b, a)) <= 1e-8 * std::max(1.0, got));
        CHECK(got >= 0.0);
    }
    CHECK_THROWS_AS(frechet_distance(stats_of(Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2)),
                                     stats_of(Eigen::VectorXd::Zero(3), Eigen::MatrixXd::Identity(3, 3))),
                    InvalidInput);
}

TEST_CASE("frechet_distance of singular covariances stays finite")
{
    Eigen::MatrixXd z = Eigen::MatrixXd::Zero(3, 3);
    const auto a = stats_of(Eigen::Vector3d(0, 0, 0), z);
    const auto b = stats_of(Eigen::Vector3d(1, 0, 0), z);
    const double d = frechet_distance(a, b);
    CHECK(std::abs(d - 1.0) <= 1e-9);
}

TEST_CASE("lpips proxy: zero on identical inputs, symmetric, matches a scalar oracle")
{
    losses::IdentityExtractor fx;
    torch::manual_seed(2);
    auto a = torch::rand({2, 3, 4, 5}, torch::kFloat64) * 2 - 1;
    auto b = torch::rand({2, 3, 4, 5}, torch::kFloat64) * 2 - 1;
    CHECK(std::abs(lpips_proxy(a, a, fx)) <= 1e-12);
    CHECK(std::abs(lpips_proxy(a, b, fx) - lpips_proxy(b, a, fx)) <= 1e-12);

    auto per = lpips_proxy_per_pair(a, b, fx);
    REQUIRE(per.size(0) == 2);
    for (int64_t i = 0; i < 2; ++i) {
        double acc = 0;
        for (int64_t y = 0; y < 4; ++y)
            for (int64_t x = 0; x < 5; ++x) {
                double na = 0, nb = 0;
                for (int64_t c = 0; c < 3; ++c) {
                    na += std::pow(a[i][c][y][x].item<double>(), 2);
                    nb += std::pow(b[i][c][y][x].item<double>(), 2);
                }
                na = std::sqrt(na) + 1e-10;
                nb = std::sqrt(nb) + 1e-10;
                for (int64_t c = 0; c < 3; ++c)
                    acc += std::pow(a[i][c][y][x].item<double>() / na - b[i][c][y][x].item<double>() / nb, 2);
            }
        CHECK(std::abs(per[i].item<double>() - acc / 20.0) <= 1e-8);
    }
}

TEST_CASE("make_grid layout")
{
    auto img = torch::zeros({3, 4, 6});
    auto g = make_grid({{img, img, img}, {img, img, img}}, 2);
    CHECK(g.sizes() == torch::IntArrayRef({3, 2 * 6 + 2, 3 * 8 + 2}));
    CHECK(g[0][0][0].item<double>() == 1.0);
    CHECK(g[0][2][2].item<double>() == 0.0);
}

TEST_CASE("evaluate with the identity model scores perfect")
{
    testing::TempDir tmp("eval");
    dataprep::ShapesWorldConfig sw;
    sw.canvas = 16;
    sw.num_classes = 2;
    sw.seed = 8;
    sw.split = "test";
    dataprep::generate_shapesworld(sw, 20, tmp / "data");

    EvalConfig cfg;
    cfg.identity_model = true;
    cfg.data_dir = tmp / "data";
    cfg.out_dir = tmp / "out";
    cfg.batch_size = 6;
    cfg.grid_rows = 3;
    cfg.grid_samples = 2;
    auto r = evaluate(cfg);
    CHECK(r.n_images == 20);
    CHECK(r.failures == 0);
    CHECK(std::abs(r.fid) <= 1e-4);
    CHECK(std::abs(r.lpips_proxy) <= 1e-6);
    CHECK(std::filesystem::exists(tmp / "out" / "report.json"));
    auto grid = load_rgb(tmp / "out" / "grid.png");
    CHECK(grid.height() == 3 * 18 + 2);
    CHECK(grid.width() == 4 * 18 + 2);

    auto again = evaluate(cfg);
    CHECK(again.fingerprint == r.fingerprint);

    EvalConfig missing = cfg;
    missing.identity_model = false;
    missing.checkpoint = tmp / "nope";
    missing.extractor_path = tmp / "nope.pt";
    CHECK_THROWS_AS(evaluate(missing), IoError);
}

TEST_CASE("pooled mean of concatenated sets and feature dimension")
{
    torch::manual_seed(3);
    auto x = torch::randn({13, 5}, torch::kFloat64);
    auto y = torch::randn({29, 5}, torch::kFloat64) + 2;
    const auto sx = compute_stats(x), sy = compute_stats(y), sxy = compute_stats(torch::cat({x, y}, 0));
    const Eigen::VectorXd pooled = (13.0 * sx.mean + 29.0 * sy.mean) / 42.0;
    CHECK((pooled - sxy.mean).cwiseAbs().maxCoeff() <= 1e-9);

    losses::TrunkExtractor fx(losses::ShapesClassifier(3, std::vector<int64_t>{4, 6}));
    auto img = torch::rand({4, 3, 16, 16}) * 2 - 1;
    CHECK(extract_stats(img, fx).dim() == fx.feature_dim());
}

TEST_CASE("ablation table medians")
{
    AblationRow row;
    row.use_top_down = false;
    for (double f : {3.0, 1.0, 2.0}) {
        MetricsReport m;
        m.fid = f;
        m.lpips_proxy = f / 10;
        row.runs.push_back(m);
    }
    CHECK(row.median_fid() == 2.0);
    CHECK(row.median_lpips() == doctest::Approx(0.2));
    const auto t = ablation_table({row});
    CHECK(t.find("2.00000") != std::string::npos);
}
