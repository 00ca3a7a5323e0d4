#include "unitbox/eval_harness.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "unitbox/checkpoint.hpp"

namespace unitbox {

MatchResult match_detections(const std::vector<Detection>& dets, const std::vector<RectBox>& gts,
                             double iou_threshold) {
    MatchResult r;
    std::vector<char> taken(gts.size(), 0);
    for (const auto& d : dets) {
        int best = -1;
        double best_iou = -1.0;
        for (std::size_t g = 0; g < gts.size(); ++g) {
            if (taken[g]) continue;
            const double iou = rect_iou(d.box, gts[g]);
            if (iou > best_iou) {
                best_iou = iou;
                best = static_cast<int>(g);
            }
        }
        if (best >= 0 && best_iou >= iou_threshold) {
            taken[static_cast<std::size_t>(best)] = 1;
            ++r.true_positives;
            r.ious.push_back(best_iou);
        } else {
            ++r.false_positives;
        }
    }
    r.false_negatives = static_cast<int>(gts.size()) - r.true_positives;
    return r;
}

EvalSet make_eval_set(const SynthConfig& cfg, std::uint64_t seed, int count) {
    DatasetStream stream(cfg, seed);
    std::vector<SceneSpec> scenes;
    for (int k = 0; k < count; ++k) scenes.push_back(stream.scene(static_cast<std::uint64_t>(k)));
    return make_eval_set(std::move(scenes));
}

EvalSet make_eval_set(std::vector<SceneSpec> scenes) {
    EvalSet set;
    for (const auto& s : scenes) set.images.push_back(render(s));
    set.scenes = std::move(scenes);
    return set;
}

namespace {

constexpr int kInferenceBatch = 10;

void predict_range(const UnitBoxNet& net, const EvalSet& set, std::size_t begin, std::size_t end,
                   std::vector<ScenePrediction>& out) {
    std::size_t i = begin;
    while (i < end) {
        // group consecutive scenes of equal size
        const Shape one = set.images[i].shape();
        std::size_t j = i;
        while (j < end && j - i < kInferenceBatch && set.images[j].shape() == one) ++j;
        Tensor batch({static_cast<int>(j - i), 1, one.h, one.w});
        for (std::size_t k = i; k < j; ++k) {
            const auto src = set.images[k].data();
            std::copy(src.begin(), src.end(), batch.data().begin() + static_cast<std::ptrdiff_t>((k - i) * src.size()));
        }
        const NetworkOutput o = net.predict(batch);
        const Tensor probs = sigmoid_map(o.conf_logits);
        for (std::size_t k = i; k < j; ++k) {
            const int n = static_cast<int>(k - i);
            out[k] = {batch_item(probs, n), batch_item(o.box, n)};
        }
        i = j;
    }
}

template <typename F>
void parallel_blocks(std::size_t count, int threads, F&& work) {
    const std::size_t t = static_cast<std::size_t>(std::max(1, threads));
    if (t == 1 || count < 2) {
        work(std::size_t{0}, count);
        return;
    }
    std::vector<std::thread> pool;
    const std::size_t block = (count + t - 1) / t;
    for (std::size_t b = 0; b < count; b += block) pool.emplace_back(work, b, std::min(count, b + block));
    for (auto& th : pool) th.join();
}

}  // namespace

std::vector<ScenePrediction> predict_all(const UnitBoxNet& net, const EvalSet& set, int threads) {
    std::vector<ScenePrediction> out(set.scenes.size());
    parallel_blocks(set.scenes.size(), threads,
                    [&](std::size_t b, std::size_t e) { predict_range(net, set, b, e, out); });
    return out;
}

std::vector<ScenePrediction> oracle_predictions(const EvalSet& set) {
    std::vector<ScenePrediction> out;
    for (const auto& scene : set.scenes) {
        Sample s = encode_targets(scene);
        out.push_back({std::move(s.confidence), std::move(s.box)});
    }
    return out;
}

PixelCoord center_pixel(const RectBox& rect) {
    return {static_cast<int>(std::lround(rect.center_y())), static_cast<int>(std::lround(rect.center_x()))};
}

double center_pixel_iou(const Tensor& box, const RectBox& gt) {
    const PixelCoord c = center_pixel(gt);
    const Shape& s = box.shape();
    if (c.row < 0 || c.row >= s.h || c.col < 0 || c.col >= s.w) {
        throw std::invalid_argument("center_pixel_iou: object center outside the box map");
    }
    const DistanceBox d{box.at(0, 0, c.row, c.col), box.at(0, 1, c.row, c.col), box.at(0, 2, c.row, c.col),
                        box.at(0, 3, c.row, c.col)};
    return rect_iou(distances_to_rect(c, d), gt);
}

EvalMetrics evaluate_predictions(const std::vector<ScenePrediction>& preds, const EvalSet& set,
                                 const PostprocessConfig& post, double match_iou) {
    if (preds.size() != set.scenes.size()) throw std::invalid_argument("evaluate_predictions: size mismatch");
    EvalMetrics m;
    double iou_sum = 0.0;
    for (std::size_t k = 0; k < preds.size(); ++k) {
        const auto gts = set.scenes[k].rects();
        const auto dets = detect(preds[k].confidence, preds[k].box, post);
        const MatchResult r = match_detections(dets, gts, match_iou);
        m.objects += static_cast<int>(gts.size());
        m.true_positives += r.true_positives;
        m.false_positives += r.false_positives;
        m.false_negatives += r.false_negatives;
        for (const auto& g : gts) iou_sum += center_pixel_iou(preds[k].box, g);
    }
    m.miss_rate = m.objects > 0 ? static_cast<double>(m.false_negatives) / m.objects : 0.0;
    m.mean_center_iou = m.objects > 0 ? iou_sum / m.objects : 0.0;
    return m;
}

EvalMetrics evaluate_model(const UnitBoxNet& net, const EvalSet& set, const PostprocessConfig& post, double match_iou,
                           int threads) {
    return evaluate_predictions(predict_all(net, set, threads), set, post, match_iou);
}

double mean_center_iou(const std::vector<ScenePrediction>& preds, const EvalSet& set) {
    if (preds.size() != set.scenes.size()) throw std::invalid_argument("mean_center_iou: size mismatch");
    double sum = 0.0;
    int count = 0;
    for (std::size_t k = 0; k < preds.size(); ++k) {
        for (const auto& g : set.scenes[k].rects()) {
            sum += center_pixel_iou(preds[k].box, g);
            ++count;
        }
    }
    return count > 0 ? sum / count : 0.0;
}

double mean_center_iou(const UnitBoxNet& net, const EvalSet& set, int threads) {
    return mean_center_iou(predict_all(net, set, threads), set);
}

std::vector<CurvePoint> convergence_curve(const NetworkConfig& net_cfg, const std::vector<CheckpointRecord>& checkpoints,
                                          const EvalSet& set, const PostprocessConfig& post, int threads) {
    std::vector<CurvePoint> curve;
    for (const auto& rec : checkpoints) {
        const UnitBoxNet net = network_at(net_cfg, rec);
        curve.push_back({static_cast<double>(rec.iteration), evaluate_model(net, set, post, 0.5, threads).miss_rate});
    }
    return curve;
}

std::vector<CurvePoint> convergence_curve(const RunLayout& layout, int last, int stride, const EvalSet& set,
                                          const PostprocessConfig& post, int threads) {
    if (stride < 1) throw std::invalid_argument("convergence_curve: stride must be >= 1");
    std::vector<int> iterations;
    for (int it = 0; it < last; it += stride) iterations.push_back(it);
    iterations.push_back(last);
    std::vector<CurvePoint> curve;
    for (int it : iterations) {
        const auto file = checkpoint_path(layout, it);
        if (!std::filesystem::exists(file)) throw CheckpointError("missing checkpoint " + file.string());
        const UnitBoxNet net = load_network(file);
        curve.push_back({static_cast<double>(it), evaluate_model(net, set, post, 0.5, threads).miss_rate});
    }
    return curve;
}

std::vector<double> default_roc_thresholds() {
    std::vector<double> t;
    for (int k = 1; k <= 19; ++k) t.push_back(0.05 * k);
    return t;
}

std::vector<RocPoint> roc_points(const std::vector<ScenePrediction>& preds, const EvalSet& set,
                                 const PostprocessConfig& base, const std::vector<double>& thresholds,
                                 double match_iou) {
    std::vector<RocPoint> out;
    for (double t : thresholds) {
        PostprocessConfig post = base;
        post.threshold = t;
        const EvalMetrics m = evaluate_predictions(preds, set, post, match_iou);
        const double tpr = m.objects > 0 ? static_cast<double>(m.true_positives) / m.objects : 0.0;
        out.push_back({t, m.false_positives, tpr});
    }
    return out;
}

std::vector<RocPoint> roc_points(const UnitBoxNet& net, const EvalSet& set, const PostprocessConfig& base,
                                 const std::vector<double>& thresholds, int threads) {
    return roc_points(predict_all(net, set, threads), set, base, thresholds);
}

SceneSpec scale_sweep_base_scene(const SynthConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    const int side = (cfg.min_size + cfg.max_size) / 2;
    const double x0 = (cfg.width - 1 - side) / 2;
    const double y0 = (cfg.height - 1 - side) / 2;
    SceneSpec scene;
    scene.height = cfg.height;
    scene.width = cfg.width;
    scene.background = cfg.background;
    scene.noise = cfg.noise;
    scene.seed = seed;
    scene.objects.push_back({{x0, y0, x0 + side, y0 + side}, 0.5 * (cfg.min_contrast + cfg.max_contrast)});
    return scene;
}

SceneSpec scaled_scene_checked(const SceneSpec& base, double factor) {
    const SceneSpec scene = scale_scene(base, factor);
    for (const auto& o : scene.objects) {
        if (o.rect.width() < 4 || o.rect.height() < 4) {
            throw std::invalid_argument("scale factor " + format_real(factor) + " shrinks an object below 4 px");
        }
        if (o.rect.x_min < 0 || o.rect.y_min < 0 || o.rect.x_max > scene.width - 1 || o.rect.y_max > scene.height - 1) {
            throw std::invalid_argument("scale factor " + format_real(factor) + " pushes an object outside the image");
        }
    }
    return scene;
}

std::vector<ScaleSweepRow> scale_sweep(const UnitBoxNet& iou_model, const UnitBoxNet& l2_model, const SceneSpec& base,
                                       const std::vector<double>& factors, const PostprocessConfig& post) {
    std::vector<ScaleSweepRow> rows;
    for (double f : factors) {
        const SceneSpec scene = scaled_scene_checked(base, f);
        const EvalSet set = make_eval_set({scene});
        const RectBox gt = scene.objects.front().rect;
        for (const auto& [label, net] : {std::pair<const char*, const UnitBoxNet*>{"iou", &iou_model},
                                         std::pair<const char*, const UnitBoxNet*>{"l2", &l2_model}}) {
            const auto preds = predict_all(*net, set);
            double det_iou = 0.0;
            for (const auto& d : detect(preds[0].confidence, preds[0].box, post)) {
                det_iou = std::max(det_iou, rect_iou(d.box, gt));
            }
            rows.push_back({f, label, scene.width, center_pixel_iou(preds[0].box, gt), det_iou});
        }
    }
    return rows;
}

CsvTable curve_csv(const std::vector<std::string>& labels, const std::vector<std::vector<CurvePoint>>& curves,
                   const std::string& x_name, const std::string& y_name) {
    CsvTable t({"model", x_name, y_name});
    for (std::size_t k = 0; k < curves.size(); ++k) {
        for (const auto& p : curves[k]) t.add_row({labels[k], format_real(p.x), format_real(p.y)});
    }
    return t;
}

CsvTable roc_csv(const std::vector<std::string>& labels, const std::vector<std::vector<RocPoint>>& curves) {
    CsvTable t({"model", "threshold", "false_positives", "tp_rate"});
    for (std::size_t k = 0; k < curves.size(); ++k) {
        for (const auto& p : curves[k]) {
            t.add_row({labels[k], format_real(p.threshold), format_int(p.false_positives), format_real(p.tp_rate)});
        }
    }
    return t;
}

CsvTable scale_sweep_csv(const std::vector<ScaleSweepRow>& rows) {
    CsvTable t({"factor", "model", "image_size", "center_pixel_iou", "detection_iou"});
    for (const auto& r : rows) {
        t.add_row({format_real(r.factor), r.model, format_int(r.image_size), format_real(r.center_iou),
                   format_real(r.detection_iou)});
    }
    return t;
}

CsvTable detections_csv(const std::vector<std::vector<Detection>>& per_image) {
    CsvTable t({"image_id", "x_min", "y_min", "x_max", "y_max", "score"});
    for (std::size_t k = 0; k < per_image.size(); ++k) {
        for (const auto& d : per_image[k]) {
            t.add_row({format_int(static_cast<long long>(k)), format_real(d.box.x_min), format_real(d.box.y_min),
                       format_real(d.box.x_max), format_real(d.box.y_max), format_real(d.score)});
        }
    }
    return t;
}

}  // namespace unitbox
