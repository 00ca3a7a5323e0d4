#pragma once

#include <functional>
#include <vector>

#include "unitbox/checkpoint.hpp"
#include "unitbox/network.hpp"
#include "unitbox/optimizer.hpp"
#include "unitbox/run_config.hpp"
#include "unitbox/synth_data.hpp"

namespace unitbox {

/// Losses of the batch consumed at `iteration`, measured before that step.
struct LogRow {
    int iteration = 0;
    double combined = 0.0;
    double confidence = 0.0;
    double box = 0.0;
};

/// Parameters after `iteration` optimizer steps, rounded to binary32.
struct CheckpointRecord {
    int iteration = 0;
    std::vector<NamedTensor> params;
};

/// Raised when a loss stops being finite; carries the iteration.
class TrainingDivergedError : public NonFiniteError {
public:
    TrainingDivergedError(int iteration, const std::string& what);
    int iteration() const { return iteration_; }

private:
    int iteration_;
};

/// Single-threaded momentum-SGD training loop over a seeded scene stream.
class Trainer {
public:
    explicit Trainer(const RunConfig& cfg);

    /// Consumes one batch, logs its losses and applies one SGD step.
    LogRow step();

    int iteration() const { return iteration_; }
    const RunConfig& config() const { return cfg_; }
    const UnitBoxNet& network() const { return net_; }
    const std::vector<LogRow>& log() const { return log_; }
    const std::vector<CheckpointRecord>& checkpoints() const { return checkpoints_; }

    /// Trains until `target` iterations, snapshotting at every multiple of the
    /// checkpoint stride and at `target` itself.
    void run_until(int target);

    CheckpointRecord snapshot() const;

private:
    void maybe_checkpoint(int target);

    RunConfig cfg_;
    UnitBoxNet net_;
    SgdOptimizer opt_;
    DatasetStream stream_;
    int iteration_ = 0;
    std::vector<LogRow> log_;
    std::vector<CheckpointRecord> checkpoints_;
};

/// Output of a full training run.
struct TrainResult {
    std::vector<LogRow> log;
    std::vector<CheckpointRecord> checkpoints;
};

TrainResult train(const RunConfig& cfg);

/// Writes logs/train_log.csv and checkpoints/iter_XXXXXX.ckpt under `layout`.
void write_training_artifacts(const RunConfig& cfg, const TrainResult& result, const RunLayout& layout);

std::filesystem::path checkpoint_path(const RunLayout& layout, int iteration);

/// Rebuilds a network from a checkpoint record of a run.
UnitBoxNet network_at(const NetworkConfig& cfg, const CheckpointRecord& record);

}  // namespace unitbox
