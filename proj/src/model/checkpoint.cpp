#include "cognet/model/checkpoint.hpp"

#include <fstream>
#include <iterator>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "cognet/common/errors.hpp"

namespace cognet::model {

namespace fs = std::filesystem;

namespace {
std::string join_name(const std::string& prefix, const std::string& name)
{
    return prefix.empty() ? name : prefix + "." + name;
}
}  // namespace

TensorMap named_tensors(const torch::nn::Module& module, const std::string& prefix)
{
    TensorMap out;
    for (const auto& p : module.named_parameters()) out[join_name(prefix, p.key())] = p.value();
    for (const auto& b : module.named_buffers()) out[join_name(prefix, b.key())] = b.value();
    return out;
}

void load_named_tensors(torch::nn::Module& module, const TensorMap& tensors, const std::string& prefix)
{
    torch::NoGradGuard guard;
    auto assign = [&](const std::string& name, torch::Tensor& dst) {
        const auto it = tensors.find(join_name(prefix, name));
        if (it == tensors.end()) throw ParseError(fmt::format("checkpoint lacks tensor {}", join_name(prefix, name)));
        if (it->second.sizes() != dst.sizes())
            throw ParseError(fmt::format("tensor {} has shape [{}], expected [{}]", it->first,
                                         fmt::join(it->second.sizes(), ","), fmt::join(dst.sizes(), ",")));
        dst.copy_(it->second);
    };
    for (auto& p : module.named_parameters()) assign(p.key(), p.value());
    for (auto& b : module.named_buffers()) assign(b.key(), b.value());
}

void save_tensor_archive(const fs::path& path, const TensorMap& tensors)
{
    c10::Dict<std::string, torch::Tensor> dict;
    for (const auto& [k, v] : tensors) dict.insert(k, v.detach().cpu().contiguous());
    const auto bytes = torch::pickle_save(c10::IValue(dict));
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError(fmt::format("cannot write {}", path.string()));
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw IoError(fmt::format("short write to {}", path.string()));
}

TensorMap load_tensor_archive(const fs::path& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError(fmt::format("cannot open {}", path.string()));
    std::vector<char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    TensorMap out;
    try {
        const auto value = torch::pickle_load(bytes);
        for (const auto& entry : value.toGenericDict())
            out[entry.key().toStringRef()] = entry.value().toTensor();
    } catch (const c10::Error& e) {
        throw ParseError(fmt::format("{} is not a tensor archive: {}", path.string(), e.what_without_backtrace()));
    }
    return out;
}

void save_checkpoint(const fs::path& dir, const Checkpoint& ckpt)
{
    const fs::path tmp = dir.string() + ".tmp";
    std::error_code ec;
    fs::remove_all(tmp, ec);
    fs::create_directories(tmp, ec);
    if (ec) throw IoError(fmt::format("cannot create {}: {}", tmp.string(), ec.message()));

    save_tensor_archive(tmp / "params.pt", ckpt.params);
    save_tensor_archive(tmp / "optimizer.pt", ckpt.optimizer);
    auto meta = ckpt.metadata;
    meta["model"] = ckpt.model.to_json();
    meta["format"] = "cognet-checkpoint-v1";
    {
        std::ofstream os(tmp / "metadata.json");
        if (!os) throw IoError(fmt::format("cannot write {}", (tmp / "metadata.json").string()));
        os << meta.dump(1) << "\n";
    }
    fs::remove_all(dir, ec);
    fs::rename(tmp, dir, ec);
    if (ec) throw IoError(fmt::format("cannot move checkpoint into {}: {}", dir.string(), ec.message()));
}

Checkpoint load_checkpoint(const fs::path& dir)
{
    if (!fs::is_directory(dir)) throw IoError(fmt::format("checkpoint {} does not exist", dir.string()));
    Checkpoint ckpt;
    std::ifstream is(dir / "metadata.json");
    if (!is) throw IoError(fmt::format("checkpoint {} has no metadata.json", dir.string()));
    try {
        is >> ckpt.metadata;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(fmt::format("{}: {}", (dir / "metadata.json").string(), e.what()));
    }
    if (!ckpt.metadata.contains("model")) throw ParseError("checkpoint metadata lacks the model config");
    ckpt.model = ModelConfig::from_json(ckpt.metadata["model"]);
    ckpt.params = load_tensor_archive(dir / "params.pt");
    if (fs::exists(dir / "optimizer.pt")) ckpt.optimizer = load_tensor_archive(dir / "optimizer.pt");
    return ckpt;
}

CogNet load_generator(const fs::path& dir, bool prefer_ema, nlohmann::json* metadata)
{
    auto ckpt = load_checkpoint(dir);
    CogNet g(ckpt.model);
    const bool has_ema = ckpt.params.count("generator_ema.decoder.constant") > 0;
    load_named_tensors(*g, ckpt.params, prefer_ema && has_ema ? "generator_ema" : "generator");
    g->eval();
    if (metadata) *metadata = ckpt.metadata;
    return g;
}

}  // namespace cognet::model
