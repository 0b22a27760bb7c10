#include "cognet/dataprep/shapesworld.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include <fmt/format.h>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "cognet/common/errors.hpp"
#include "cognet/common/rng.hpp"
#include "cognet/dataprep/coco.hpp"

namespace cognet::dataprep {

namespace fs = std::filesystem;

namespace {

constexpr std::array<std::array<double, 3>, ShapesWorldConfig::kMaxClasses> kObjectColors{{
    {220, 50, 50},    // circle
    {50, 90, 220},    // square
    {240, 200, 40},   // triangle
    {60, 180, 80},    // star
    {160, 60, 200},   // diamond
    {250, 130, 30},   // cross
}};

using Color = std::array<double, 3>;

Color random_color(Rng& rng)
{
    std::uniform_real_distribution<double> u(0.0, 255.0);
    return {u(rng), u(rng), u(rng)};
}

double color_distance(const Color& a, const Color& b)
{
    return std::abs(a[0] - b[0]) + std::abs(a[1] - b[1]) + std::abs(a[2] - b[2]);
}

std::vector<double> regular_polygon(int sides, double cx, double cy, double r, double angle)
{
    std::vector<double> xy;
    for (int i = 0; i < sides; ++i) {
        const double a = angle + 2.0 * std::numbers::pi * i / sides;
        xy.push_back(cx + r * std::cos(a));
        xy.push_back(cy + r * std::sin(a));
    }
    return xy;
}

std::vector<double> star_polygon(double cx, double cy, double r, double angle)
{
    std::vector<double> xy;
    for (int i = 0; i < 10; ++i) {
        const double a = angle + std::numbers::pi * i / 5.0;
        const double rr = (i % 2 == 0) ? r : 0.45 * r;
        xy.push_back(cx + rr * std::cos(a));
        xy.push_back(cy + rr * std::sin(a));
    }
    return xy;
}

std::vector<double> cross_polygon(double cx, double cy, double r, double angle)
{
    const double t = 0.38 * r;
    const std::array<std::array<double, 2>, 12> pts{{{-t, -r}, {t, -r}, {t, -t}, {r, -t}, {r, t}, {t, t},
                                                      {t, r}, {-t, r}, {-t, t}, {-r, t}, {-r, -t}, {-t, -t}}};
    std::vector<double> xy;
    const double c = std::cos(angle), s = std::sin(angle);
    for (const auto& p : pts) {
        xy.push_back(cx + c * p[0] - s * p[1]);
        xy.push_back(cy + s * p[0] + c * p[1]);
    }
    return xy;
}

torch::Tensor shape_mask(int64_t category, int64_t n, double cx, double cy, double r, double angle)
{
    switch (category) {
    case 0: {
        auto ys = torch::arange(n, torch::kFloat64).add(0.5).view({n, 1});
        auto xs = torch::arange(n, torch::kFloat64).add(0.5).view({1, n});
        return ((xs - cx).square() + (ys - cy).square() <= r * r).to(torch::kUInt8);
    }
    case 1: return rasterize_polygon(regular_polygon(4, cx, cy, r, angle + std::numbers::pi / 4), n, n);
    case 2: return rasterize_polygon(regular_polygon(3, cx, cy, r, angle - std::numbers::pi / 2), n, n);
    case 3: return rasterize_polygon(star_polygon(cx, cy, r, angle - std::numbers::pi / 2), n, n);
    case 4: return rasterize_polygon(regular_polygon(4, cx, cy, r, angle), n, n);
    default: return rasterize_polygon(cross_polygon(cx, cy, r, angle), n, n);
    }
}

double texture_value(BackgroundFamily f, double x, double y, double period, double phase, double n)
{
    const auto band = [&](double v) { return std::fmod(std::floor((v + phase) / (period / 2.0)), 2.0) != 0.0; };
    switch (f) {
    case BackgroundFamily::HorizontalStripes: return band(y) ? 1.0 : 0.0;
    case BackgroundFamily::VerticalStripes: return band(x) ? 1.0 : 0.0;
    case BackgroundFamily::Checkerboard: return (band(x) != band(y)) ? 1.0 : 0.0;
    case BackgroundFamily::Dots: {
        const double px = std::fmod(x + phase, period) - period / 2.0;
        const double py = std::fmod(y + phase, period) - period / 2.0;
        return (px * px + py * py <= (0.3 * period) * (0.3 * period)) ? 1.0 : 0.0;
    }
    case BackgroundFamily::DiagonalStripes: return band((x + y) / std::numbers::sqrt2) ? 1.0 : 0.0;
    case BackgroundFamily::Rings: {
        const double d = std::hypot(x - n / 2.0, y - n / 2.0);
        return band(d) ? 1.0 : 0.0;
    }
    }
    return 0.0;
}

}  // namespace

const std::array<const char*, ShapesWorldConfig::kMaxClasses>& shape_names()
{
    static const std::array<const char*, ShapesWorldConfig::kMaxClasses> names{
        "circle", "square", "triangle", "star", "diamond", "cross"};
    return names;
}

void ShapesWorldConfig::validate() const
{
    if (!(rho >= 0.0 && rho <= 1.0)) throw InvalidInput(fmt::format("rho must lie in [0, 1], got {}", rho));
    if (num_classes < 2 || num_classes > kMaxClasses)
        throw InvalidInput(fmt::format("classes must lie in [2, {}], got {}", kMaxClasses, num_classes));
    if (canvas < 16) throw InvalidInput("canvas must be at least 16 pixels");
    if (!(min_radius_frac > 0.0 && min_radius_frac <= max_radius_frac && max_radius_frac < 0.5))
        throw InvalidInput("object radius range must satisfy 0 < min <= max < 0.5");
    if (min_period < 2 || min_period > max_period) throw InvalidInput("texture period range invalid");
}

nlohmann::json ShapesWorldConfig::to_json() const
{
    return {{"canvas", canvas},         {"num_classes", num_classes},       {"rho", rho},
            {"min_radius_frac", min_radius_frac}, {"max_radius_frac", max_radius_frac},
            {"min_period", min_period}, {"max_period", max_period},         {"seed", seed},
            {"split", split}};
}

ShapesWorldItem render_shapesworld(const ShapesWorldConfig& cfg, int64_t index)
{
    cfg.validate();
    Rng rng = derive_rng(cfg.seed, static_cast<uint64_t>(index));
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const int64_t n = cfg.canvas;
    const auto nd = static_cast<double>(n);

    ShapesWorldItem item;
    item.category = std::uniform_int_distribution<int64_t>(0, cfg.num_classes - 1)(rng);
    const bool correlated = u01(rng) < cfg.rho;
    const int64_t uniform_family = std::uniform_int_distribution<int64_t>(0, cfg.num_classes - 1)(rng);
    item.family = static_cast<BackgroundFamily>(correlated ? item.category : uniform_family);

    const double period = std::uniform_int_distribution<int64_t>(cfg.min_period, cfg.max_period)(rng);
    const double phase = u01(rng) * period;
    Color a = random_color(rng), b = random_color(rng);
    while (color_distance(a, b) < 200.0) b = random_color(rng);

    const double r = nd * (cfg.min_radius_frac + u01(rng) * (cfg.max_radius_frac - cfg.min_radius_frac));
    const double margin = r + 2.0;
    const double cx = margin + u01(rng) * (nd - 2.0 * margin);
    const double cy = margin + u01(rng) * (nd - 2.0 * margin);
    const double angle = (u01(rng) - 0.5) * 0.6;
    const double brightness = 0.7 + 0.5 * u01(rng);
    const double light_dir = u01(rng) * 2.0 * std::numbers::pi;

    item.mask = shape_mask(item.category, n, cx, cy, r, angle);
    // Outline pixels: inside the shape with a 4-neighbour outside.
    auto padded = torch::constant_pad_nd(item.mask, {1, 1, 1, 1}, 0);
    auto interior = padded.slice(0, 0, n).slice(1, 1, n + 1) & padded.slice(0, 2, n + 2).slice(1, 1, n + 1) &
                    padded.slice(0, 1, n + 1).slice(1, 0, n) & padded.slice(0, 1, n + 1).slice(1, 2, n + 2);
    auto outline = item.mask & (1 - interior);

    item.image = torch::empty({n, n, 3}, torch::kUInt8);
    auto* px = item.image.data_ptr<uint8_t>();
    const auto* m = item.mask.data_ptr<uint8_t>();
    const auto* edge = outline.data_ptr<uint8_t>();
    const auto& base = kObjectColors[static_cast<size_t>(item.category)];
    for (int64_t y = 0; y < n; ++y) {
        for (int64_t x = 0; x < n; ++x) {
            const int64_t i = y * n + x;
            Color c;
            if (m[i]) {
                const double shade = 1.0 + 0.15 * ((x - cx) * std::cos(light_dir) + (y - cy) * std::sin(light_dir)) / r;
                const double k = brightness * shade * (edge[i] ? 0.6 : 1.0);
                for (int ch = 0; ch < 3; ++ch) c[ch] = base[ch] * k;
            } else {
                const double t = texture_value(item.family, x + 0.5, y + 0.5, period, phase, nd);
                for (int ch = 0; ch < 3; ++ch) c[ch] = a[ch] * (1.0 - t) + b[ch] * t;
            }
            for (int ch = 0; ch < 3; ++ch)
                px[i * 3 + ch] = static_cast<uint8_t>(std::clamp(std::lround(c[ch]), 0L, 255L));
        }
    }
    item.descriptor = {{"background_family", static_cast<int64_t>(item.family)},
                       {"period", period},
                       {"phase", phase},
                       {"colors", {{a[0], a[1], a[2]}, {b[0], b[1], b[2]}}},
                       {"center", {cx, cy}},
                       {"radius", r}};
    return item;
}

DatasetManifest generate_shapesworld(const ShapesWorldConfig& cfg, int64_t n, const fs::path& out)
{
    cfg.validate();
    if (n < 1) throw InvalidInput("shapesworld needs n >= 1");
    std::error_code ec;
    fs::create_directories(out / "images", ec);
    fs::create_directories(out / "masks", ec);
    if (ec || !fs::is_directory(out / "images"))
        throw IoError(fmt::format("cannot create output directory {}", out.string()));

    DatasetManifest m;
    m.split = cfg.split;
    m.image_root = out;
    for (int64_t c = 0; c < cfg.num_classes; ++c) m.categories.push_back({c, shape_names()[static_cast<size_t>(c)]});
    for (int64_t i = 0; i < n; ++i) {
        const auto item = render_shapesworld(cfg, i);
        const std::string image_file = fmt::format("images/{:06d}.png", i);
        const std::string mask_file = fmt::format("masks/{:06d}.png", i);

        cv::Mat rgb(static_cast<int>(cfg.canvas), static_cast<int>(cfg.canvas), CV_8UC3,
                    const_cast<uint8_t*>(item.image.data_ptr<uint8_t>()));
        cv::Mat bgr;
        cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
        auto mask255 = (item.mask * 255).contiguous();
        cv::Mat gray(static_cast<int>(cfg.canvas), static_cast<int>(cfg.canvas), CV_8UC1, mask255.data_ptr<uint8_t>());
        if (!cv::imwrite((out / image_file).string(), bgr) || !cv::imwrite((out / mask_file).string(), gray))
            throw IoError(fmt::format("cannot write into {}", out.string()));

        m.images.push_back({i, image_file, cfg.canvas, cfg.canvas});
        AnnotationRecord ann;
        ann.image_id = i;
        ann.category_id = item.category;
        ann.mask_file = mask_file;
        ann.extra = item.descriptor;
        m.annotations.push_back(std::move(ann));
    }
    auto j = to_json(m);
    j["shapesworld"] = cfg.to_json();
    std::ofstream os(out / "manifest.json");
    if (!os) throw IoError(fmt::format("cannot write {}", (out / "manifest.json").string()));
    os << j.dump(1) << "\n";
    return m;
}

}  // namespace cognet::dataprep
