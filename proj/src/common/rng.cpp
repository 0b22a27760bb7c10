#include "cognet/common/rng.hpp"

#include <sstream>

#include "cognet/common/errors.hpp"

namespace cognet {

torch::Tensor randn(Rng& rng, torch::IntArrayRef shape, torch::ScalarType dtype)
{
    auto out = torch::empty(shape, torch::kFloat64);
    std::normal_distribution<double> dist(0.0, 1.0);
    auto* p = out.data_ptr<double>();
    for (int64_t i = 0; i < out.numel(); ++i) p[i] = dist(rng);
    return out.to(dtype);
}

torch::Tensor rand_uniform(Rng& rng, torch::IntArrayRef shape, torch::ScalarType dtype)
{
    auto out = torch::empty(shape, torch::kFloat64);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    auto* p = out.data_ptr<double>();
    for (int64_t i = 0; i < out.numel(); ++i) p[i] = dist(rng);
    return out.to(dtype);
}

std::string serialize_rng(const Rng& rng)
{
    std::ostringstream os;
    os << rng;
    return os.str();
}

Rng deserialize_rng(const std::string& state)
{
    Rng rng;
    std::istringstream is(state);
    is >> rng;
    if (!is) throw ParseError("corrupt RNG state");
    return rng;
}

Rng derive_rng(std::uint64_t seed, std::uint64_t salt)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(salt), static_cast<std::uint32_t>(salt >> 32)};
    return Rng(seq);
}

}  // namespace cognet
