// Runs every acceptance criterion and prints one PASS/FAIL line for each.
// Exit status is 0 only when all of them pass. Artifacts of the training
// comparison are written under ./acceptance_artifacts.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "unitbox/cli.hpp"
#include "unitbox/eval_harness.hpp"
#include "unitbox/experiment.hpp"
#include "unitbox/gradcheck.hpp"
#include "unitbox/loss_layers.hpp"

using namespace unitbox;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

Outcome gradient_fidelity() {
    const auto t0 = std::chrono::steady_clock::now();
    const GradCheckReport r = check_iou_gradients(1000, 7, 1e-4, 0.1);
    const double secs = seconds_since(t0);
    const int exit_code = run_cli({"unitbox", "gradcheck", "--output", "acceptance_artifacts/gradcheck.csv"});
    return {r.pass && r.samples == 1000 && secs <= 5.0 && exit_code == kExitOk,
            "max rel err " + fmt("%.2e", r.max_rel_error) + " over " + std::to_string(r.samples) + " pairs in " +
                fmt("%.3f", secs) + " s; gradcheck exit " + std::to_string(exit_code)};
}

Outcome forward_oracle() {
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<double> u(0.0, 20.0);
    double worst = 0.0;
    for (int k = 0; k < 10000; ++k) {
        const DistanceBox pred{u(rng), u(rng), u(rng), u(rng)};
        DistanceBox gt{u(rng), u(rng), u(rng), u(rng)};
        if (gt.empty()) gt.top += 1.0;
        const PixelCoord anchor{32, 32};
        const double oracle = rect_iou(distances_to_rect(anchor, pred), distances_to_rect(anchor, gt));
        worst = std::max(worst, std::abs(iou_forward(pred, gt).iou - oracle));
    }
    const IoUForwardRecord w = iou_forward({1, 1, 1, 1}, {2, 2, 2, 2});
    const bool worked = std::abs(w.iou - 0.25) <= 1e-12 && std::abs(w.loss - std::log(4.0)) <= 1e-12;
    return {worst <= 1e-9 && worked,
            "max |diff| " + fmt("%.2e", worst) + " over 10000 pairs; worked pair iou " + fmt("%.6f", w.iou) + " loss " +
                fmt("%.6f", w.loss)};
}

Outcome scale_invariance() {
    std::mt19937_64 rng(202);
    std::uniform_real_distribution<double> u(0.1, 10.0);
    double iou_dev = 0.0, l2_dev = 0.0;
    for (int k = 0; k < 1000; ++k) {
        const DistanceBox p{u(rng), u(rng), u(rng), u(rng)};
        const DistanceBox g{u(rng), u(rng), u(rng), u(rng)};
        const double li = iou_forward(p, g).loss, l2 = l2_forward(p, g);
        for (double s : {0.5, 2.0, 10.0}) {
            iou_dev = std::max(iou_dev, std::abs(iou_forward(p.scaled(s), g.scaled(s)).loss - li));
            l2_dev = std::max(l2_dev, std::abs(l2_forward(p.scaled(s), g.scaled(s)) / (s * s * l2) - 1.0));
        }
    }
    return {iou_dev <= 1e-9 && l2_dev <= 1e-12,
            "max IoU-loss change " + fmt("%.2e", iou_dev) + "; L2 ratio to s^2 off by " + fmt("%.2e", l2_dev)};
}

Outcome pipeline_exactness() {
    const EvalSet set = make_eval_set(SynthConfig{}, 303, 100);
    const auto preds = oracle_predictions(set);
    int objects = 0, recovered = 0, false_pos = 0;
    double min_iou = 1.0;
    for (std::size_t k = 0; k < preds.size(); ++k) {
        const auto dets = detect(preds[k].confidence, preds[k].box, PostprocessConfig{});
        const auto gts = set.scenes[k].rects();
        const MatchResult m = match_detections(dets, gts, 0.99);
        objects += static_cast<int>(gts.size());
        recovered += m.true_positives;
        false_pos += m.false_positives;
        for (double v : m.ious) min_iou = std::min(min_iou, v);
    }
    return {recovered == objects && false_pos == 0,
            std::to_string(recovered) + "/" + std::to_string(objects) + " objects at IoU >= 0.99, " +
                std::to_string(false_pos) + " false positives, min IoU " + fmt("%.4f", min_iou)};
}

Outcome layer_correctness() {
    bool ok = true;
    double worst = 0.0;
    for (LayerKind k : all_layer_kinds()) {
        const GradCheckReport r = check_layer_gradients(k, {1, 2, 6, 6}, 7, 1e-4);
        ok = ok && r.pass;
        worst = std::max(worst, r.max_rel_error);
    }
    const GradCheckReport net = check_network_gradients(NetworkConfig{}, {1, 1, 16, 16}, 7, 1e-3);
    return {ok && net.pass, "layers max rel err " + fmt("%.2e", worst) + " (tol 1e-4); network " +
                                fmt("%.2e", net.max_rel_error) + " (tol 1e-3, " + std::to_string(net.samples) +
                                " probes, " + std::to_string(net.skipped) + " skipped at ReLU kinks)"};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome determinism() {
    const fs::path root = fs::absolute("acceptance_artifacts/determinism");
    fs::remove_all(root);
    fs::create_directories(root);
    const fs::path cfg = root / "config.json";
    std::ofstream(cfg) << nlohmann::json{{"config_version", 1},
                                         {"name", "det"},
                                         {"iterations", 40},
                                         {"checkpoint_stride", 20},
                                         {"eval_scenes", 20},
                                         {"output_dir", (root / "runs").string()},
                                         {"optimizer", {{"learning_rate", 0.1}}}}
                              .dump(2);
    const fs::path run = root / "runs" / "det";
    const auto collect = [&] {
        std::vector<std::string> files;
        for (const auto& sub : {"logs", "checkpoints"}) {
            std::vector<fs::path> paths;
            for (const auto& e : fs::directory_iterator(run / sub)) paths.push_back(e.path());
            std::sort(paths.begin(), paths.end());
            for (const auto& p : paths) files.push_back(p.filename().string() + "\n" + slurp(p));
        }
        return files;
    };
    if (run_cli({"unitbox", "train", cfg.string()}) != kExitOk) return {false, "first run failed"};
    const auto first = collect();
    fs::remove_all(run);
    if (run_cli({"unitbox", "train", cfg.string()}) != kExitOk) return {false, "second run failed"};
    const auto second = collect();
    return {first == second && first.size() == 4,
            std::to_string(first.size()) + " files compared, " + (first == second ? "identical" : "DIFFERENT")};
}

struct TrainingOutcomes {
    Outcome convergence;
    Outcome scale;
};

TrainingOutcomes training_criteria() {
    const RunConfig cfg;
    ComparisonOptions opt;
    opt.progress = [](const std::string& msg) {
        std::printf("  .. %s\n", msg.c_str());
        std::fflush(stdout);
    };
    const auto t0 = std::chrono::steady_clock::now();
    ComparisonResult r;
    try {
        r = run_comparison(cfg, opt);
    } catch (const std::exception& e) {
        return {{false, std::string("training failed: ") + e.what()}, {false, "no models"}};
    }
    const double secs = seconds_since(t0);
    const fs::path out = "acceptance_artifacts/comparison";
    for (const auto& [file, table] : comparison_tables(r)) table.write(out / file);

    const EvalMetrics& a = r.iou.final_metrics;
    const EvalMetrics& b = r.l2.final_metrics;
    Outcome conv{a.mean_center_iou >= 0.7 && a.miss_rate <= b.miss_rate && secs <= 1200.0,
                 "IoU: center IoU " + fmt("%.3f", a.mean_center_iou) + ", miss " + fmt("%.4f", a.miss_rate) +
                     " (lr " + fmt("%g", r.iou.config.optimizer.learning_rate) + "); L2: miss " +
                     fmt("%.4f", b.miss_rate) + ", center IoU " + fmt("%.3f", b.mean_center_iou) + " (lr " +
                     fmt("%g", r.l2.config.optimizer.learning_rate) + "); " + fmt("%.0f", secs) + " s"};

    const UnitBoxNet iou_net = network_at(cfg.network, r.iou.train.checkpoints.back());
    const UnitBoxNet l2_net = network_at(cfg.network, r.l2.train.checkpoints.back());
    const auto rows =
        scale_sweep(iou_net, l2_net, scale_sweep_base_scene(cfg.data), {0.5, 1.0, 2.0, 4.0}, cfg.postprocess);
    scale_sweep_csv(rows).write(out / "scale_sweep.csv");
    bool ok = true;
    std::string detail;
    for (std::size_t k = 0; k + 1 < rows.size(); k += 2) {
        const ScaleSweepRow& iou = rows[k];
        const ScaleSweepRow& l2 = rows[k + 1];
        const int object = static_cast<int>(std::lround(iou.factor * (cfg.data.min_size + cfg.data.max_size) / 2.0));
        const bool in_range = object >= cfg.data.min_size && object <= cfg.data.max_size;
        ok = ok && iou.center_iou >= l2.center_iou && (!in_range || iou.center_iou >= 0.5);
        detail += (detail.empty() ? "" : "; ") + fmt("x%g", iou.factor) + " IoU " + fmt("%.3f", iou.center_iou) +
                  " vs L2 " + fmt("%.3f", l2.center_iou);
    }
    return {conv, {ok, detail}};
}

}  // namespace

int main() {
    fs::create_directories("acceptance_artifacts");
    std::vector<std::pair<std::string, Outcome>> results;
    const auto report = [&](const std::string& id, const std::string& name, Outcome o) {
        std::printf("%s %-28s %s  %s\n", id.c_str(), name.c_str(), o.pass ? "PASS" : "FAIL", o.detail.c_str());
        std::fflush(stdout);
        results.emplace_back(id, std::move(o));
    };
    report("A1", "gradient fidelity", gradient_fidelity());
    report("A2", "forward oracle equivalence", forward_oracle());
    report("A3", "scale invariance", scale_invariance());
    report("A6", "pipeline exactness", pipeline_exactness());
    report("A7", "layer correctness", layer_correctness());
    report("A8", "determinism", determinism());
    TrainingOutcomes t = training_criteria();
    report("A4", "convergence IoU vs L2", std::move(t.convergence));
    report("A5", "scale robustness", std::move(t.scale));

    int failed = 0;
    for (const auto& [id, o] : results) failed += !o.pass;
    std::printf("%d/%zu criteria passed\n", static_cast<int>(results.size()) - failed, results.size());
    return failed == 0 ? 0 : 1;
}
