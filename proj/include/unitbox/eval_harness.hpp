#pragma once

#include <string>
#include <vector>

#include "unitbox/network.hpp"
#include "unitbox/postprocess.hpp"
#include "unitbox/report_io.hpp"
#include "unitbox/synth_data.hpp"
#include "unitbox/training.hpp"

namespace unitbox {

struct MatchResult {
    int true_positives = 0;
    int false_positives = 0;
    int false_negatives = 0;
    std::vector<double> ious;  // one per true positive, in detection order
};

/// Greedy matching in the given (score-sorted) detection order: each detection
/// claims the unmatched ground truth of highest IoU if that IoU >= threshold.
MatchResult match_detections(const std::vector<Detection>& dets, const std::vector<RectBox>& gts,
                             double iou_threshold = 0.5);

struct CurvePoint {
    double x = 0.0;
    double y = 0.0;
};

/// Fixed scenes with their rendered images.
struct EvalSet {
    std::vector<SceneSpec> scenes;
    std::vector<Tensor> images;
};

EvalSet make_eval_set(const SynthConfig& cfg, std::uint64_t seed, int count);
EvalSet make_eval_set(std::vector<SceneSpec> scenes);

/// Confidence probabilities and box distances for one scene.
struct ScenePrediction {
    Tensor confidence;  // 1 x 1 x H x W
    Tensor box;         // 1 x 4 x H x W
};

/// Runs inference over the set. With threads > 1 the work is split into
/// contiguous blocks; results are identical to the single-threaded run.
std::vector<ScenePrediction> predict_all(const UnitBoxNet& net, const EvalSet& set, int threads = 1);

/// Predictions equal to the encoded ground-truth targets.
std::vector<ScenePrediction> oracle_predictions(const EvalSet& set);

struct EvalMetrics {
    int objects = 0;
    int true_positives = 0;
    int false_positives = 0;
    int false_negatives = 0;
    double miss_rate = 1.0;
    double mean_center_iou = 0.0;
};

/// Object center rounded to the pixel grid.
PixelCoord center_pixel(const RectBox& rect);

/// IoU between `gt` and the box read from `box` (1 x 4 x H x W) at the center pixel of `gt`.
double center_pixel_iou(const Tensor& box, const RectBox& gt);

EvalMetrics evaluate_predictions(const std::vector<ScenePrediction>& preds, const EvalSet& set,
                                 const PostprocessConfig& post, double match_iou = 0.5);
EvalMetrics evaluate_model(const UnitBoxNet& net, const EvalSet& set, const PostprocessConfig& post,
                           double match_iou = 0.5, int threads = 1);

/// Mean over all objects of the center-pixel IoU.
double mean_center_iou(const std::vector<ScenePrediction>& preds, const EvalSet& set);
double mean_center_iou(const UnitBoxNet& net, const EvalSet& set, int threads = 1);

/// Miss rate at each checkpoint (x = iteration).
std::vector<CurvePoint> convergence_curve(const NetworkConfig& net_cfg, const std::vector<CheckpointRecord>& checkpoints,
                                          const EvalSet& set, const PostprocessConfig& post, int threads = 1);

/// Same, reading iter_XXXXXX.ckpt files for every `stride` up to `last`.
/// Throws CheckpointError naming the first missing checkpoint.
std::vector<CurvePoint> convergence_curve(const RunLayout& layout, int last, int stride, const EvalSet& set,
                                          const PostprocessConfig& post, int threads = 1);

struct RocPoint {
    double threshold = 0.0;
    int false_positives = 0;
    double tp_rate = 0.0;
};

/// 0.05, 0.10, ..., 0.95
std::vector<double> default_roc_thresholds();

std::vector<RocPoint> roc_points(const std::vector<ScenePrediction>& preds, const EvalSet& set,
                                 const PostprocessConfig& base, const std::vector<double>& thresholds,
                                 double match_iou = 0.5);
std::vector<RocPoint> roc_points(const UnitBoxNet& net, const EvalSet& set, const PostprocessConfig& base,
                                 const std::vector<double>& thresholds, int threads = 1);

struct ScaleSweepRow {
    double factor = 1.0;
    std::string model;
    int image_size = 0;
    double center_iou = 0.0;
    double detection_iou = 0.0;
};

/// Canvas of the training size holding one square object whose side is the
/// midpoint of the training size range, centered.
SceneSpec scale_sweep_base_scene(const SynthConfig& cfg, std::uint64_t seed = 0);

/// Throws std::invalid_argument when a factor makes the object smaller than
/// 4 px or pushes it outside the image.
SceneSpec scaled_scene_checked(const SceneSpec& base, double factor);

std::vector<ScaleSweepRow> scale_sweep(const UnitBoxNet& iou_model, const UnitBoxNet& l2_model, const SceneSpec& base,
                                       const std::vector<double>& factors, const PostprocessConfig& post);

CsvTable curve_csv(const std::vector<std::string>& labels, const std::vector<std::vector<CurvePoint>>& curves,
                   const std::string& x_name, const std::string& y_name);
CsvTable roc_csv(const std::vector<std::string>& labels, const std::vector<std::vector<RocPoint>>& curves);
CsvTable scale_sweep_csv(const std::vector<ScaleSweepRow>& rows);
CsvTable detections_csv(const std::vector<std::vector<Detection>>& per_image);

}  // namespace unitbox
