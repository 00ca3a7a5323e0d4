#include "unitbox/synth_data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>
#include <string>

namespace unitbox {

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    // splitmix64 finalizer over a combined state
    std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

void SynthConfig::validate() const {
    if (height < 16 || width < 16) throw std::invalid_argument("data.height/width: canvas must be at least 16x16");
    if (min_objects < 0 || max_objects < min_objects) {
        throw std::invalid_argument("data.min_objects/max_objects: need 0 <= min <= max");
    }
    if (min_size < 4 || max_size < min_size) throw std::invalid_argument("data.min_size/max_size: need 4 <= min <= max");
    if (max_size > std::min(height, width) - 1) {
        throw std::invalid_argument("data.max_size: objects must fit inside the canvas");
    }
    if (background < 0.0 || background > 1.0) throw std::invalid_argument("data.background: must be in [0, 1]");
    if (min_contrast < 0.0 || max_contrast < min_contrast) {
        throw std::invalid_argument("data.min_contrast/max_contrast: need 0 <= min <= max");
    }
    if (noise < 0.0) throw std::invalid_argument("data.noise: must be >= 0");
    if (max_pair_iou < 0.0 || max_pair_iou > 1.0) throw std::invalid_argument("data.max_pair_iou: must be in [0, 1]");
    if (!(positive_shrink > 0.0 && positive_shrink <= 1.0)) {
        throw std::invalid_argument("data.positive_shrink: must be in (0, 1]");
    }
    if (batch < 1) throw std::invalid_argument("data.batch: must be >= 1");
    if (max_attempts < 1) throw std::invalid_argument("data.max_attempts: must be >= 1");
}

std::vector<RectBox> SceneSpec::rects() const {
    std::vector<RectBox> out;
    out.reserve(objects.size());
    for (const auto& o : objects) out.push_back(o.rect);
    return out;
}

std::uint64_t SceneSpec::hash() const {
    const auto bits = [](double v) {
        std::uint64_t u = 0;
        std::memcpy(&u, &v, sizeof u);
        return u;
    };
    std::uint64_t h = mix_seed(static_cast<std::uint64_t>(height), static_cast<std::uint64_t>(width));
    h = mix_seed(h, bits(background));
    h = mix_seed(h, bits(noise));
    h = mix_seed(h, seed);
    for (const auto& o : objects) {
        for (double v : {o.rect.x_min, o.rect.y_min, o.rect.x_max, o.rect.y_max, o.contrast}) h = mix_seed(h, bits(v));
    }
    return h;
}

namespace {

bool separated(const RectBox& a, const RectBox& b, int gap) {
    if (gap < 0) return true;
    const bool in_x = b.x_min - a.x_max - 1 >= gap || a.x_min - b.x_max - 1 >= gap;
    const bool in_y = b.y_min - a.y_max - 1 >= gap || a.y_min - b.y_max - 1 >= gap;
    return in_x || in_y;
}

}  // namespace

SceneSpec generate_scene(const SynthConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> count_dist(cfg.min_objects, cfg.max_objects);
    std::uniform_int_distribution<int> size_dist(cfg.min_size, cfg.max_size);
    std::uniform_real_distribution<double> contrast_dist(cfg.min_contrast, cfg.max_contrast);

    SceneSpec scene;
    scene.height = cfg.height;
    scene.width = cfg.width;
    scene.background = cfg.background;
    scene.noise = cfg.noise;
    scene.seed = seed;

    const int count = count_dist(rng);
    for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
        scene.objects.clear();
        bool ok = true;
        for (int k = 0; k < count && ok; ++k) {
            const int w = size_dist(rng);
            const int h = size_dist(rng);
            // x_max = x_min + w must stay on the pixel grid [0, width - 1]
            const int x0 = std::uniform_int_distribution<int>(0, cfg.width - 1 - w)(rng);
            const int y0 = std::uniform_int_distribution<int>(0, cfg.height - 1 - h)(rng);
            const RectBox rect{static_cast<double>(x0), static_cast<double>(y0), static_cast<double>(x0 + w),
                               static_cast<double>(y0 + h)};
            for (const auto& other : scene.objects) {
                if (rect_iou(rect, other.rect) > cfg.max_pair_iou || !separated(rect, other.rect, cfg.min_gap)) {
                    ok = false;
                    break;
                }
            }
            scene.objects.push_back({rect, contrast_dist(rng)});
        }
        if (ok) return scene;
    }
    throw SceneGenerationError("generate_scene: no valid layout for " + std::to_string(count) + " objects after " +
                               std::to_string(cfg.max_attempts) + " attempts (seed " + std::to_string(seed) + ")");
}

Tensor render(const SceneSpec& scene) {
    Tensor image({1, 1, scene.height, scene.width});
    std::mt19937_64 rng(mix_seed(scene.seed, 0x6e6f697365ULL));
    std::uniform_real_distribution<double> noise(-1.0, 1.0);
    for (int i = 0; i < scene.height; ++i) {
        for (int j = 0; j < scene.width; ++j) {
            double contrast = 0.0;
            for (const auto& o : scene.objects) {
                if (o.rect.contains(j, i)) contrast = std::max(contrast, o.contrast);
            }
            const double v = scene.background + contrast + scene.noise * noise(rng);
            image.at(0, 0, i, j) = std::clamp(v, 0.0, 1.0);
        }
    }
    return image;
}

int owning_object(const SceneSpec& scene, PixelCoord p, double positive_shrink) {
    int best = -1;
    double best_d2 = 0.0;
    for (std::size_t k = 0; k < scene.objects.size(); ++k) {
        const RectBox& r = scene.objects[k].rect;
        const double cx = r.center_x();
        const double cy = r.center_y();
        const double hw = 0.5 * r.width() * positive_shrink;
        const double hh = 0.5 * r.height() * positive_shrink;
        if (std::abs(p.col - cx) > hw || std::abs(p.row - cy) > hh) continue;
        const double d2 = (p.col - cx) * (p.col - cx) + (p.row - cy) * (p.row - cy);
        if (best < 0 || d2 < best_d2) {
            best = static_cast<int>(k);
            best_d2 = d2;
        }
    }
    return best;
}

Sample encode_targets(const SceneSpec& scene, double positive_shrink) {
    const int h = scene.height;
    const int w = scene.width;
    Sample s{render(scene), Tensor({1, 1, h, w}), Tensor({1, 4, h, w}), Tensor({1, 1, h, w})};
    for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
            const int owner = owning_object(scene, {i, j}, positive_shrink);
            if (owner < 0) continue;
            const DistanceBox d = rect_to_distances({i, j}, scene.objects[static_cast<std::size_t>(owner)].rect);
            s.confidence.at(0, 0, i, j) = 1.0;
            s.mask.at(0, 0, i, j) = 1.0;
            for (int k = 0; k < 4; ++k) s.box.at(0, k, i, j) = d[static_cast<std::size_t>(k)];
        }
    }
    return s;
}

SceneSpec scale_scene(const SceneSpec& scene, double factor) {
    if (!(factor > 0.0)) throw std::invalid_argument("scale_scene: factor must be positive");
    SceneSpec out = scene;
    out.height = static_cast<int>(std::lround(scene.height * factor));
    out.width = static_cast<int>(std::lround(scene.width * factor));
    for (auto& o : out.objects) {
        o.rect = o.rect.scaled(factor);
        o.rect = {std::round(o.rect.x_min), std::round(o.rect.y_min), std::round(o.rect.x_max),
                  std::round(o.rect.y_max)};
    }
    return out;
}

Batch make_batch(const std::vector<Sample>& samples, std::vector<SceneSpec> scenes) {
    if (samples.empty()) throw std::invalid_argument("make_batch: no samples");
    const Shape one = samples.front().image.shape();
    const int n = static_cast<int>(samples.size());
    Batch b{Tensor({n, 1, one.h, one.w}), Tensor({n, 1, one.h, one.w}), Tensor({n, 4, one.h, one.w}),
            Tensor({n, 1, one.h, one.w}), std::move(scenes)};
    const auto copy_into = [](Tensor& dst, const Tensor& src, int index) {
        const auto from = src.data();
        std::copy(from.begin(), from.end(), dst.data().begin() + static_cast<std::ptrdiff_t>(index) * from.size());
    };
    for (int k = 0; k < n; ++k) {
        const Sample& s = samples[static_cast<std::size_t>(k)];
        require_same_shape(s.image.shape(), one, "make_batch");
        copy_into(b.images, s.image, k);
        copy_into(b.confidence, s.confidence, k);
        copy_into(b.box, s.box, k);
        copy_into(b.mask, s.mask, k);
    }
    return b;
}

DatasetStream::DatasetStream(SynthConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)), seed_(seed) {
    cfg_.validate();
}

std::uint64_t DatasetStream::scene_seed(std::uint64_t index) const { return mix_seed(seed_, index); }

SceneSpec DatasetStream::scene(std::uint64_t index) const { return generate_scene(cfg_, scene_seed(index)); }

Sample DatasetStream::sample(std::uint64_t index) const {
    return encode_targets(scene(index), cfg_.positive_shrink);
}

Batch DatasetStream::next_batch() {
    std::vector<Sample> samples;
    std::vector<SceneSpec> scenes;
    for (int k = 0; k < cfg_.batch; ++k, ++cursor_) {
        scenes.push_back(scene(cursor_));
        samples.push_back(encode_targets(scenes.back(), cfg_.positive_shrink));
    }
    return make_batch(samples, std::move(scenes));
}

}  // namespace unitbox
