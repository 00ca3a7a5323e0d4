#include "unitbox/experiment.hpp"

#include <cmath>
#include <fstream>
#include <memory>
#include <stdexcept>

namespace unitbox {

namespace {

std::string loss_name(BoxLossKind k) { return std::string(to_string(k)); }

}  // namespace

std::vector<double> default_lr_grid() {
    std::vector<double> grid;
    for (int e = -5; e <= -1; ++e) {
        grid.push_back(std::pow(10.0, e));
        grid.push_back(3.0 * std::pow(10.0, e));
    }
    return grid;
}

std::optional<std::size_t> select_learning_rate(const std::vector<LrCandidate>& candidates) {
    std::optional<std::size_t> best;
    for (std::size_t k = 0; k < candidates.size(); ++k) {
        const auto& c = candidates[k];
        if (c.diverged) continue;
        if (!best) {
            best = k;
            continue;
        }
        const auto& b = candidates[*best];
        if (c.metrics.miss_rate != b.metrics.miss_rate) {
            if (c.metrics.miss_rate < b.metrics.miss_rate) best = k;
        } else if (c.metrics.mean_center_iou != b.metrics.mean_center_iou) {
            if (c.metrics.mean_center_iou > b.metrics.mean_center_iou) best = k;
        } else if (c.learning_rate < b.learning_rate) {
            best = k;
        }
    }
    return best;
}

ArmResult run_arm(const RunConfig& base, BoxLossKind loss, const EvalSet& eval, const ComparisonOptions& opt) {
    if (!(opt.selection_fraction > 0.0 && opt.selection_fraction <= 1.0)) {
        throw std::invalid_argument("selection_fraction must be in (0, 1]");
    }
    if (opt.lr_grid.empty()) throw std::invalid_argument("empty learning rate grid");
    const auto say = [&](const std::string& msg) {
        if (opt.progress) opt.progress(msg);
    };

    ArmResult arm;
    arm.loss = loss;
    const int selection_iters = std::max(1, static_cast<int>(std::lround(base.iterations * opt.selection_fraction)));

    std::unique_ptr<Trainer> best;
    std::optional<std::size_t> best_index;
    for (double lr : opt.lr_grid) {
        RunConfig cfg = base;
        cfg.loss = loss;
        cfg.optimizer.learning_rate = lr;
        auto trainer = std::make_unique<Trainer>(cfg);
        LrCandidate cand;
        cand.learning_rate = lr;
        try {
            trainer->run_until(selection_iters);
            cand.metrics = evaluate_model(trainer->network(), eval, cfg.postprocess, 0.5, opt.threads);
        } catch (const TrainingDivergedError& e) {
            cand.diverged = true;
            cand.diverged_at = e.iteration();
        }
        say(loss_name(loss) + " lr " + format_real(lr) +
            (cand.diverged ? " diverged at " + format_int(cand.diverged_at)
                           : " miss " + format_real(cand.metrics.miss_rate) + " center_iou " +
                                 format_real(cand.metrics.mean_center_iou)));
        arm.candidates.push_back(cand);
        const auto pick = select_learning_rate(arm.candidates);
        if (pick && pick != best_index) {
            best_index = pick;
            best = std::move(trainer);
        }
    }
    if (!best) throw std::runtime_error(loss_name(loss) + ": every learning rate diverged");

    arm.config = best->config();
    say(loss_name(loss) + " selected lr " + format_real(arm.config.optimizer.learning_rate));
    best->run_until(base.iterations);
    arm.train = {best->log(), best->checkpoints()};
    arm.curve = convergence_curve(arm.config.network, arm.train.checkpoints, eval, arm.config.postprocess, opt.threads);
    const auto preds = predict_all(best->network(), eval, opt.threads);
    arm.final_metrics = evaluate_predictions(preds, eval, arm.config.postprocess);
    arm.roc = roc_points(preds, eval, arm.config.postprocess, default_roc_thresholds());
    say(loss_name(loss) + " final miss " + format_real(arm.final_metrics.miss_rate) + " center_iou " +
        format_real(arm.final_metrics.mean_center_iou));
    return arm;
}

ComparisonResult run_comparison(const RunConfig& base, const ComparisonOptions& opt) {
    return run_comparison(base, base, opt);
}

ComparisonResult run_comparison(const RunConfig& iou_base, const RunConfig& l2_base, const ComparisonOptions& opt) {
    iou_base.validate();
    l2_base.validate();
    RunConfig a = iou_base;
    RunConfig b = l2_base;
    for (RunConfig* c : {&a, &b}) {
        c->name = iou_base.name;
        c->loss = BoxLossKind::iou;
        c->optimizer.learning_rate = OptimizerConfig{}.learning_rate;
        c->output_dir = iou_base.output_dir;
    }
    if (!(a == b)) {
        const auto ja = to_json(a);
        const auto jb = to_json(b);
        for (const auto& [key, value] : ja.items()) {
            if (jb.at(key) != value) throw ConfigError(key + ": differs between the two configs");
        }
        throw ConfigError("configs differ");
    }
    const EvalSet eval = make_eval_set(iou_base.data, iou_base.eval_seed, iou_base.eval_scenes);
    ComparisonResult r;
    r.iou = run_arm(iou_base, BoxLossKind::iou, eval, opt);
    r.l2 = run_arm(l2_base, BoxLossKind::l2, eval, opt);
    return r;
}

CsvTable lr_search_csv(const ComparisonResult& r) {
    CsvTable t({"loss", "learning_rate", "diverged", "miss_rate", "mean_center_iou", "selected"});
    for (const ArmResult* arm : {&r.iou, &r.l2}) {
        for (const auto& c : arm->candidates) {
            const bool selected = c.learning_rate == arm->config.optimizer.learning_rate;
            t.add_row({loss_name(arm->loss), format_real(c.learning_rate), c.diverged ? "1" : "0",
                       c.diverged ? "" : format_real(c.metrics.miss_rate),
                       c.diverged ? "" : format_real(c.metrics.mean_center_iou), selected ? "1" : "0"});
        }
    }
    return t;
}

namespace {

void write_text(const std::filesystem::path& file, const std::string& text) {
    std::filesystem::create_directories(file.parent_path());
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error(file.string() + ": cannot open for writing");
    out << text;
}

}  // namespace

std::vector<std::pair<std::string, CsvTable>> comparison_tables(const ComparisonResult& r) {
    const std::vector<std::string> labels{"iou", "l2"};
    std::vector<std::pair<std::string, CsvTable>> out;
    out.emplace_back("convergence.csv", curve_csv(labels, {r.iou.curve, r.l2.curve}, "iteration", "miss_rate"));
    out.emplace_back("roc.csv", roc_csv(labels, {r.iou.roc, r.l2.roc}));
    out.emplace_back("lr_search.csv", lr_search_csv(r));
    CsvTable summary({"loss", "learning_rate", "objects", "true_positives", "false_positives", "false_negatives",
                      "miss_rate", "mean_center_iou"});
    for (const ArmResult* arm : {&r.iou, &r.l2}) {
        const auto& m = arm->final_metrics;
        summary.add_row({loss_name(arm->loss), format_real(arm->config.optimizer.learning_rate), format_int(m.objects),
                         format_int(m.true_positives), format_int(m.false_positives), format_int(m.false_negatives),
                         format_real(m.miss_rate), format_real(m.mean_center_iou)});
    }
    out.emplace_back("summary.csv", std::move(summary));
    return out;
}

namespace {

PlotSeries curve_series(const std::string& label, const std::vector<CurvePoint>& pts) {
    PlotSeries s{label, {}, {}};
    for (const auto& p : pts) {
        s.x.push_back(p.x);
        s.y.push_back(p.y);
    }
    return s;
}

PlotSeries roc_series(const std::string& label, const std::vector<RocPoint>& pts) {
    PlotSeries s{label, {}, {}};
    for (const auto& p : pts) {
        s.x.push_back(p.false_positives);
        s.y.push_back(p.tp_rate);
    }
    return s;
}

}  // namespace

void write_comparison(const RunConfig& base, const ComparisonResult& r, bool svg) {
    for (const ArmResult* arm : {&r.iou, &r.l2}) {
        RunConfig cfg = arm->config;
        cfg.name = base.name + "_" + loss_name(arm->loss);
        write_training_artifacts(cfg, arm->train, run_layout(cfg));
    }
    const RunLayout joint = run_layout(base);
    joint.create();
    for (const auto& [file, table] : comparison_tables(r)) table.write(joint.curves() / file);
    if (svg) {
        write_text(joint.curves() / "convergence.svg",
                   svg_line_plot({curve_series("iou", r.iou.curve), curve_series("l2", r.l2.curve)},
                                 "Miss rate during training", "iteration", "miss rate"));
        write_text(joint.curves() / "roc.svg",
                   svg_line_plot({roc_series("iou", r.iou.roc), roc_series("l2", r.l2.roc)}, "ROC",
                                 "false positives", "true positive rate"));
    }
}

}  // namespace unitbox
