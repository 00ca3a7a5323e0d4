#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "unitbox/eval_harness.hpp"
#include "unitbox/training.hpp"

namespace unitbox {

/// {1, 3} x {1e-5, ..., 1e-1}, ascending.
std::vector<double> default_lr_grid();

struct LrCandidate {
    double learning_rate = 0.0;
    bool diverged = false;
    int diverged_at = -1;
    EvalMetrics metrics;  // at the selection point; meaningless if diverged
};

/// Lower miss rate wins, then higher mean center IoU, then the smaller rate.
/// Diverged candidates never win. Returns the index into `candidates`.
std::optional<std::size_t> select_learning_rate(const std::vector<LrCandidate>& candidates);

struct ArmResult {
    BoxLossKind loss = BoxLossKind::iou;
    RunConfig config;  // with the selected learning rate
    std::vector<LrCandidate> candidates;
    TrainResult train;
    std::vector<CurvePoint> curve;
    EvalMetrics final_metrics;
    std::vector<RocPoint> roc;
};

struct ComparisonOptions {
    std::vector<double> lr_grid = default_lr_grid();
    double selection_fraction = 0.25;
    int threads = 1;
    std::function<void(const std::string&)> progress;
};

/// Runs every grid rate for selection_fraction of the budget, keeps the best
/// and continues it to the full budget. Throws std::runtime_error if every
/// candidate diverges.
ArmResult run_arm(const RunConfig& base, BoxLossKind loss, const EvalSet& eval, const ComparisonOptions& opt);

struct ComparisonResult {
    ArmResult iou;
    ArmResult l2;
};

/// Both arms share data seed, network seed and eval set; they differ only in
/// the box loss and the selected learning rate.
ComparisonResult run_comparison(const RunConfig& base, const ComparisonOptions& opt);

/// Same with one config per arm. Throws ConfigError unless the two agree on
/// everything but name, loss, learning rate and output directory.
ComparisonResult run_comparison(const RunConfig& iou_base, const RunConfig& l2_base, const ComparisonOptions& opt);

CsvTable lr_search_csv(const ComparisonResult& r);

/// Writes both runs (logs, checkpoints) under <output_dir>/<name>_iou and
/// _l2, and the joint curves under <output_dir>/<name>/curves.
void write_comparison(const RunConfig& base, const ComparisonResult& r, bool svg);

/// Tables of a comparison, keyed by file name.
std::vector<std::pair<std::string, CsvTable>> comparison_tables(const ComparisonResult& r);

}  // namespace unitbox
