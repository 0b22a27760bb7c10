#include "cognet/eval/fid.hpp"

#include <cmath>
#include <iostream>

#include <Eigen/Eigenvalues>

#include "cognet/common/errors.hpp"

namespace cognet::eval {

namespace {

// Neumaier-compensated running sum.
struct CompensatedSum {
    double sum = 0.0, carry = 0.0;
    void add(double v)
    {
        const double t = sum + v;
        carry += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
        sum = t;
    }
    double value() const { return sum + carry; }
};

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m, bool& ok)
{
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    ok = es.info() == Eigen::Success;
    if (!ok) return {};
    const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

double trace_sqrt_product(const Eigen::MatrixXd& sa, const Eigen::MatrixXd& sb, bool& ok)
{
    const Eigen::MatrixXd root_a = psd_sqrt(sa, ok);
    if (!ok) return 0.0;
    Eigen::MatrixXd m = root_a * sb * root_a;
    m = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
    ok = es.info() == Eigen::Success && es.eigenvalues().allFinite();
    if (!ok) return 0.0;
    return es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
}

}  // namespace

void FeatureStats::validate() const
{
    if (count < 2) throw InvalidInput("feature statistics need at least two samples");
    if (cov.rows() != mean.size() || cov.cols() != mean.size()) throw InvalidInput("covariance shape mismatch");
    if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-9) throw InvalidInput("covariance is not symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-8) throw InvalidInput("covariance is not positive semidefinite");
}

FeatureStats compute_stats(const torch::Tensor& features)
{
    if (features.dim() != 2 || features.size(0) < 2) throw InvalidInput("compute_stats needs [n >= 2, d] features");
    const auto x = features.detach().to(torch::kFloat64).contiguous();
    const int64_t n = x.size(0), d = x.size(1);
    const double* p = x.data_ptr<double>();

    FeatureStats s;
    s.count = n;
    s.mean.resize(d);
    for (int64_t j = 0; j < d; ++j) {
        CompensatedSum acc;
        for (int64_t i = 0; i < n; ++i) acc.add(p[i * d + j]);
        s.mean[j] = acc.value() / static_cast<double>(n);
    }
    s.cov.resize(d, d);
    std::vector<double> centered(static_cast<size_t>(n * d));
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < d; ++j) centered[static_cast<size_t>(i * d + j)] = p[i * d + j] - s.mean[j];
    for (int64_t j = 0; j < d; ++j) {
        for (int64_t k = j; k < d; ++k) {
            CompensatedSum acc;
            for (int64_t i = 0; i < n; ++i)
                acc.add(centered[static_cast<size_t>(i * d + j)] * centered[static_cast<size_t>(i * d + k)]);
            s.cov(j, k) = s.cov(k, j) = acc.value() / static_cast<double>(n - 1);
        }
    }
    return s;
}

torch::Tensor extract_features(const torch::Tensor& images, losses::FeatureExtractor& fx, int64_t chunk)
{
    torch::NoGradGuard guard;
    std::vector<torch::Tensor> parts;
    for (int64_t i = 0; i < images.size(0); i += chunk)
        parts.push_back(fx.pooled(images.slice(0, i, std::min(images.size(0), i + chunk))));
    return torch::cat(parts, 0);
}

FeatureStats extract_stats(const torch::Tensor& images, losses::FeatureExtractor& fx, int64_t chunk)
{
    if (images.size(0) < 2) throw InvalidInput("extract_stats needs at least two images");
    return compute_stats(extract_features(images, fx, chunk));
}

double frechet_distance(const FeatureStats& a, const FeatureStats& b, bool* regularized)
{
    if (a.dim() != b.dim()) throw InvalidInput("frechet_distance: feature dimensions differ");
    const double mean_term = (a.mean - b.mean).squaredNorm();
    bool ok = true;
    double tr_sqrt = trace_sqrt_product(a.cov, b.cov, ok);
    Eigen::MatrixXd sa = a.cov, sb = b.cov;
    if (!ok) {
        std::cerr << "warning: covariance square root failed; retrying with 1e-6 I added\n";
        const auto eps = 1e-6 * Eigen::MatrixXd::Identity(a.dim(), a.dim());
        sa += eps;
        sb += eps;
        tr_sqrt = trace_sqrt_product(sa, sb, ok);
        if (!ok) throw NumericalError("frechet_distance: eigensolver failed after regularization");
    }
    if (regularized) *regularized = sa.size() > 0 && !(sa.isApprox(a.cov, 0.0));
    const double d = mean_term + sa.trace() + sb.trace() - 2.0 * tr_sqrt;
    return std::max(d, 0.0);
}

torch::Tensor lpips_proxy_per_pair(const torch::Tensor& a, const torch::Tensor& b, losses::FeatureExtractor& fx)
{
    if (a.sizes() != b.sizes()) throw InvalidInput("lpips_proxy: pairs differ in shape");
    torch::NoGradGuard guard;
    const auto fa = fx.layers(a);
    const auto fb = fx.layers(b);
    auto total = torch::zeros({a.size(0)}, torch::kFloat64);
    for (size_t l = 0; l < fa.size(); ++l) {
        auto na = fa[l].to(torch::kFloat64);
        auto nb = fb[l].to(torch::kFloat64);
        na = na / (na.norm(2, 1, true) + 1e-10);
        nb = nb / (nb.norm(2, 1, true) + 1e-10);
        total += (na - nb).square().sum(1).mean({1, 2});
    }
    return total / static_cast<double>(fa.size());
}

double lpips_proxy(const torch::Tensor& a, const torch::Tensor& b, losses::FeatureExtractor& fx)
{
    return lpips_proxy_per_pair(a, b, fx).mean().item<double>();
}

}  // namespace cognet::eval
