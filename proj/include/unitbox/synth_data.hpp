#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "unitbox/box_geometry.hpp"
#include "unitbox/tensor.hpp"

namespace unitbox {

/// Generator settings for grayscale scenes of bright axis-aligned rectangles.
/// Object corners are integer pixel coordinates; a pixel (i, j) lies inside an
/// object when its point coordinate is inside the closed rectangle.
struct SynthConfig {
    int height = 64;
    int width = 64;
    int min_objects = 1;
    int max_objects = 2;
    int min_size = 16;
    int max_size = 48;
    double background = 0.2;
    double min_contrast = 0.3;
    double max_contrast = 0.6;
    double noise = 0.05;           // additive noise is uniform in [-noise, noise]
    double max_pair_iou = 0.1;
    /// Background pixels required between objects along x or y. Negative
    /// disables the check so objects may overlap up to max_pair_iou.
    int min_gap = 3;
    double positive_shrink = 1.0;  // fraction of each object's extent marked positive
    int batch = 10;
    int max_attempts = 1000;

    void validate() const;

    friend bool operator==(const SynthConfig&, const SynthConfig&) = default;
};

struct SceneObject {
    RectBox rect;
    double contrast = 0.0;

    friend bool operator==(const SceneObject&, const SceneObject&) = default;
};

struct SceneSpec {
    int height = 0;
    int width = 0;
    double background = 0.0;
    double noise = 0.0;
    std::uint64_t seed = 0;
    std::vector<SceneObject> objects;

    std::vector<RectBox> rects() const;
    std::uint64_t hash() const;

    friend bool operator==(const SceneSpec&, const SceneSpec&) = default;
};

/// Image plus training targets, each with batch dimension 1.
struct Sample {
    Tensor image;       // 1 x 1 x H x W in [0, 1]
    Tensor confidence;  // 1 x 1 x H x W in {0, 1}
    Tensor box;         // 1 x 4 x H x W, (top, bottom, left, right) distances
    Tensor mask;        // 1 x 1 x H x W, 1 where the box target is defined
};

struct Batch {
    Tensor images;
    Tensor confidence;
    Tensor box;
    Tensor mask;
    std::vector<SceneSpec> scenes;
};

class SceneGenerationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Deterministic in (cfg, seed). Throws SceneGenerationError when no valid
/// layout is found within cfg.max_attempts.
SceneSpec generate_scene(const SynthConfig& cfg, std::uint64_t seed);

/// Background plus per-object contrast plus seeded uniform noise, clipped to [0, 1].
Tensor render(const SceneSpec& scene);

/// Confidence, box and mask targets. Pixels covered by several objects belong
/// to the object with the nearest center (lower index on ties).
Sample encode_targets(const SceneSpec& scene, double positive_shrink = 1.0);

/// Index of the object owning pixel `p`, or -1 when the pixel is background.
int owning_object(const SceneSpec& scene, PixelCoord p, double positive_shrink = 1.0);

/// Scales every coordinate of the scene, including the canvas.
SceneSpec scale_scene(const SceneSpec& scene, double factor);

/// Stacks samples along the batch dimension.
Batch make_batch(const std::vector<Sample>& samples, std::vector<SceneSpec> scenes);

/// Seeded, endless sequence of scenes; scene k is a pure function of (cfg, seed, k).
class DatasetStream {
public:
    DatasetStream(SynthConfig cfg, std::uint64_t seed);

    const SynthConfig& config() const { return cfg_; }
    std::uint64_t seed() const { return seed_; }

    std::uint64_t scene_seed(std::uint64_t index) const;
    SceneSpec scene(std::uint64_t index) const;
    Sample sample(std::uint64_t index) const;

    /// Next cfg.batch samples, advancing the cursor.
    Batch next_batch();
    std::uint64_t cursor() const { return cursor_; }

private:
    SynthConfig cfg_;
    std::uint64_t seed_;
    std::uint64_t cursor_ = 0;
};

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace unitbox
