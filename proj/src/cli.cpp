#include "unitbox/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "unitbox/checkpoint.hpp"
#include "unitbox/eval_harness.hpp"
#include "unitbox/experiment.hpp"
#include "unitbox/gradcheck.hpp"
#include "unitbox/run_config.hpp"
#include "unitbox/training.hpp"

namespace unitbox {

namespace {

namespace fs = std::filesystem;

struct GradcheckArgs {
    int n = 1000;
    std::uint64_t seed = 7;
    double tol = 1e-4;
    double delta = 0.1;
    double net_tol = 1e-3;
    std::string output = "runs/gradcheck/gradcheck.csv";
};

struct EvalArgs {
    std::string checkpoint;
    std::string config;
    std::string output_dir = "runs/eval";
    int scenes = -1;
    long long seed = -1;
    double threshold = -1;
    int min_area = -1;
    double nms = -1;
};

struct CompareArgs {
    std::string config_a;
    std::string config_b;
    std::vector<double> lr_grid = default_lr_grid();
    double selection_fraction = 0.25;
    bool svg = false;
};

struct SweepArgs {
    std::string iou_checkpoint;
    std::string l2_checkpoint;
    std::vector<double> factors{0.5, 1.0, 2.0, 4.0};
    std::uint64_t seed = 0;
    std::string output = "runs/scale_sweep/scale_sweep.csv";
};

struct DumpArgs {
    std::string config;
    std::uint64_t seed = 1;
    std::uint64_t index = 0;
    std::string output_dir = "runs/dump";
};

void print_report(const GradCheckReport& r) {
    std::printf("%-22s %s samples %d skipped %d max_rel %.3e mean_rel %.3e tol %.1e\n", r.name.c_str(),
                r.pass ? "PASS" : "FAIL", r.samples, r.skipped, r.max_rel_error, r.mean_rel_error, r.tolerance);
}

int cmd_gradcheck(const GradcheckArgs& a) {
    std::vector<GradCheckReport> reports;
    reports.push_back(check_iou_gradients(a.n, a.seed, a.tol, a.delta));
    for (LayerKind k : all_layer_kinds()) reports.push_back(check_layer_gradients(k, {1, 2, 6, 6}, a.seed, a.tol));
    reports.push_back(check_network_gradients(NetworkConfig{}, {1, 1, 16, 16}, a.seed, a.net_tol));
    bool ok = true;
    for (const auto& r : reports) {
        print_report(r);
        ok = ok && r.pass;
    }
    gradcheck_csv(reports).write(a.output);
    std::printf("%s\n", ok ? "all gradient checks passed" : "gradient check FAILED");
    return ok ? kExitOk : kExitFailure;
}

void print_metrics(const std::string& label, const EvalMetrics& m) {
    std::printf("%s: objects %d tp %d fp %d fn %d miss_rate %.4f mean_center_iou %.4f\n", label.c_str(), m.objects,
                m.true_positives, m.false_positives, m.false_negatives, m.miss_rate, m.mean_center_iou);
}

CsvTable metrics_csv(const EvalMetrics& m) {
    CsvTable t({"objects", "true_positives", "false_positives", "false_negatives", "miss_rate", "mean_center_iou"});
    t.add_row({format_int(m.objects), format_int(m.true_positives), format_int(m.false_positives),
               format_int(m.false_negatives), format_real(m.miss_rate), format_real(m.mean_center_iou)});
    return t;
}

int cmd_train(const std::string& config_path, int threads) {
    const RunConfig cfg = load_run_config(config_path);
    const RunLayout layout = run_layout(cfg);
    std::printf("training %s (%s loss, lr %g, %d iterations) -> %s\n", cfg.name.c_str(),
                std::string(to_string(cfg.loss)).c_str(), cfg.optimizer.learning_rate, cfg.iterations,
                layout.root.string().c_str());
    const TrainResult result = train(cfg);
    write_training_artifacts(cfg, result, layout);

    const EvalSet eval = make_eval_set(cfg.data, cfg.eval_seed, cfg.eval_scenes);
    const UnitBoxNet net = network_at(cfg.network, result.checkpoints.back());
    const EvalMetrics m = evaluate_model(net, eval, cfg.postprocess, 0.5, threads);
    metrics_csv(m).write(layout.curves() / "final_metrics.csv");
    print_metrics("final", m);
    return kExitOk;
}

// The run configuration echoed into a checkpoint, or defaults.
RunConfig config_for_checkpoint(const Checkpoint& ckpt, const std::string& override_path) {
    if (!override_path.empty()) return load_run_config(override_path);
    if (ckpt.meta.contains("run")) return run_config_from_json(nlohmann::json::parse(ckpt.meta["run"].dump()));
    return RunConfig{};
}

int cmd_eval(const EvalArgs& a, int threads) {
    const Checkpoint ckpt = read_checkpoint(a.checkpoint);
    RunConfig cfg = config_for_checkpoint(ckpt, a.config);
    if (a.scenes >= 0) cfg.eval_scenes = a.scenes;
    if (a.seed >= 0) cfg.eval_seed = static_cast<std::uint64_t>(a.seed);
    if (a.threshold >= 0) cfg.postprocess.threshold = a.threshold;
    if (a.min_area >= 0) cfg.postprocess.min_area = a.min_area;
    if (a.nms >= 0) cfg.postprocess.nms_iou = a.nms;
    cfg.postprocess.validate();

    const UnitBoxNet net = network_from_checkpoint(ckpt);
    const EvalSet eval = make_eval_set(cfg.data, cfg.eval_seed, cfg.eval_scenes);
    const auto preds = predict_all(net, eval, threads);
    const EvalMetrics m = evaluate_predictions(preds, eval, cfg.postprocess);
    std::vector<std::vector<Detection>> dets;
    for (const auto& p : preds) dets.push_back(detect(p.confidence, p.box, cfg.postprocess));

    const fs::path out(a.output_dir);
    metrics_csv(m).write(out / "metrics.csv");
    roc_csv({"model"}, {roc_points(preds, eval, cfg.postprocess, default_roc_thresholds())}).write(out / "roc.csv");
    detections_csv(dets).write(out / "detections.csv");
    print_metrics(a.checkpoint, m);
    return kExitOk;
}

int cmd_compare(const CompareArgs& a, int threads) {
    const RunConfig cfg_a = load_run_config(a.config_a);
    const RunConfig cfg_b = a.config_b.empty() ? cfg_a : load_run_config(a.config_b);
    ComparisonOptions opt;
    opt.lr_grid = a.lr_grid;
    opt.selection_fraction = a.selection_fraction;
    opt.threads = threads;
    opt.progress = [](const std::string& msg) {
        std::printf("%s\n", msg.c_str());
        std::fflush(stdout);
    };
    const ComparisonResult r = run_comparison(cfg_a, cfg_b, opt);
    write_comparison(cfg_a, r, a.svg);
    print_metrics("iou", r.iou.final_metrics);
    print_metrics("l2", r.l2.final_metrics);
    std::printf("curves written to %s\n", run_layout(cfg_a).curves().string().c_str());
    return kExitOk;
}

int cmd_scale_sweep(const SweepArgs& a) {
    const Checkpoint iou_ckpt = read_checkpoint(a.iou_checkpoint);
    const Checkpoint l2_ckpt = read_checkpoint(a.l2_checkpoint);
    const RunConfig cfg = config_for_checkpoint(iou_ckpt, "");
    const auto rows = scale_sweep(network_from_checkpoint(iou_ckpt), network_from_checkpoint(l2_ckpt),
                                  scale_sweep_base_scene(cfg.data, a.seed), a.factors, cfg.postprocess);
    const CsvTable table = scale_sweep_csv(rows);
    table.write(a.output);
    std::printf("%s", table.str().c_str());
    return kExitOk;
}

int cmd_dump_sample(const DumpArgs& a) {
    const RunConfig cfg = a.config.empty() ? RunConfig{} : load_run_config(a.config);
    const DatasetStream stream(cfg.data, a.seed);
    const Sample s = stream.sample(a.index);
    const fs::path out(a.output_dir);
    fs::create_directories(out);
    // distances are written so that the image diagonal maps to 255
    const double diag = std::hypot(cfg.data.height, cfg.data.width);
    const double box_scale = 255.0 / diag;
    write_pgm(out / "image.pgm", s.image, 0, 0, 255.0);
    write_pgm(out / "confidence.pgm", s.confidence, 0, 0, 255.0);
    const char* names[] = {"top", "bottom", "left", "right"};
    for (int c = 0; c < 4; ++c) write_pgm(out / ("box_" + std::string(names[c]) + ".pgm"), s.box, 0, c, box_scale);
    std::ofstream side(out / "scale.txt", std::ios::trunc);
    side << "image 255\nconfidence 255\nbox " << format_real(box_scale) << "\n";
    std::printf("wrote 6 PGM files to %s (box pixels = distance x %s)\n", out.string().c_str(),
                format_real(box_scale).c_str());
    return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"Toy IoU-loss dense box regression: training, evaluation and checks", "unitbox"};
    app.require_subcommand(1);
    app.fallthrough();
    int threads = 1;
    app.add_option("--threads", threads, "Worker threads for evaluation")->check(CLI::Range(1, 256));

    GradcheckArgs gc;
    auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference checks of the loss and layer gradients");
    gradcheck->add_option("--n", gc.n, "Random (pred, gt) pairs")->check(CLI::NonNegativeNumber);
    gradcheck->add_option("--seed", gc.seed, "Sampling seed");
    gradcheck->add_option("--tol", gc.tol, "Relative error tolerance for the loss and layers");
    gradcheck->add_option("--delta", gc.delta, "Exclusion width around min() ties");
    gradcheck->add_option("--net-tol", gc.net_tol, "Tolerance of the whole-network probe");
    gradcheck->add_option("--output", gc.output, "CSV report path");

    std::string train_config;
    auto* train_cmd = app.add_subcommand("train", "Train one model from a config file");
    train_cmd->add_option("config", train_config, "JSON run config")->required();

    EvalArgs ev;
    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on the fixed eval set");
    eval->add_option("checkpoint", ev.checkpoint, "Checkpoint file")->required();
    eval->add_option("--config", ev.config, "Run config (default: the one stored in the checkpoint)");
    eval->add_option("--output-dir", ev.output_dir, "Directory for metrics, ROC and detections");
    eval->add_option("--scenes", ev.scenes, "Eval scenes")->check(CLI::NonNegativeNumber);
    eval->add_option("--seed", ev.seed, "Eval seed")->check(CLI::NonNegativeNumber);
    eval->add_option("--threshold", ev.threshold, "Confidence threshold");
    eval->add_option("--min-area", ev.min_area, "Minimum component area")->check(CLI::NonNegativeNumber);
    eval->add_option("--nms", ev.nms, "NMS IoU threshold");

    CompareArgs cmp;
    auto* compare = app.add_subcommand("compare", "IoU vs L2 under the per-loss learning rate search");
    compare->add_option("config", cmp.config_a, "Run config (IoU arm, and L2 arm unless a second is given)")
        ->required();
    compare->add_option("l2_config", cmp.config_b, "Run config of the L2 arm");
    compare->add_option("--lr-grid", cmp.lr_grid, "Candidate learning rates")->delimiter(',');
    compare->add_option("--selection-fraction", cmp.selection_fraction, "Budget fraction used to pick the rate")
        ->check(CLI::Range(1e-9, 1.0));
    compare->add_flag("--svg", cmp.svg, "Also write SVG plots");

    SweepArgs sw;
    auto* sweep = app.add_subcommand("scale-sweep", "Center-pixel IoU of two models across image scales");
    sweep->add_option("iou_checkpoint", sw.iou_checkpoint, "IoU-loss checkpoint")->required();
    sweep->add_option("l2_checkpoint", sw.l2_checkpoint, "L2-loss checkpoint")->required();
    sweep->add_option("--factors", sw.factors, "Scale factors")->delimiter(',');
    sweep->add_option("--seed", sw.seed, "Noise seed of the base scene");
    sweep->add_option("--output", sw.output, "CSV path");

    DumpArgs dump;
    auto* dump_cmd = app.add_subcommand("dump-sample", "Write one training sample and its targets as PGM images");
    dump_cmd->add_option("--config", dump.config, "Run config (default settings otherwise)");
    dump_cmd->add_option("--seed", dump.seed, "Data seed");
    dump_cmd->add_option("--index", dump.index, "Scene index in the stream");
    dump_cmd->add_option("--output-dir", dump.output_dir, "Directory for the PGM files");

    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (*gradcheck) return cmd_gradcheck(gc);
        if (*train_cmd) return cmd_train(train_config, threads);
        if (*eval) return cmd_eval(ev, threads);
        if (*compare) return cmd_compare(cmp, threads);
        if (*sweep) return cmd_scale_sweep(sw);
        if (*dump_cmd) return cmd_dump_sample(dump);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitFailure;
    } catch (const TrainingDivergedError& e) {
        std::cerr << "training diverged at " << e.what() << "\n";
        return kExitFailure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    return kExitUsage;
}

}  // namespace unitbox
