#include "unitbox/training.hpp"

#include <cmath>
#include <cstdio>

#include "unitbox/loss_layers.hpp"
#include "unitbox/report_io.hpp"

namespace unitbox {

TrainingDivergedError::TrainingDivergedError(int iteration, const std::string& what)
    : NonFiniteError("iteration " + std::to_string(iteration) + ": " + what), iteration_(iteration) {}

Trainer::Trainer(const RunConfig& cfg)
    : cfg_((cfg.validate(), cfg)), net_(cfg.network), opt_(cfg.optimizer), stream_(cfg.data, cfg.data_seed) {}

LogRow Trainer::step() {
    Batch batch = stream_.next_batch();
    NetworkOutput out = net_.forward(batch.images);
    PixelLossMaps conf = map_confidence_loss(out.conf_logits, batch.confidence);
    PixelLossMaps box = map_box_loss(out.box, batch.box, batch.mask, cfg_.loss);

    LogRow row{iteration_, combined_loss(conf.loss, box.loss, cfg_.box_weight), conf.loss, box.loss};
    if (!std::isfinite(row.combined)) {
        throw TrainingDivergedError(iteration_, "non-finite loss (conf " + std::to_string(conf.loss) + ", box " +
                                                    std::to_string(box.loss) + ")");
    }
    log_.push_back(row);

    const double denom = 1.0 + cfg_.box_weight;
    for (double& g : conf.grad.data()) g /= denom;
    for (double& g : box.grad.data()) g *= cfg_.box_weight / denom;

    net_.zero_grad();
    net_.backward(conf.grad, box.grad);
    auto params = net_.parameters();
    try {
        opt_.step(params);
    } catch (const NonFiniteError& e) {
        throw TrainingDivergedError(iteration_, e.what());
    }
    ++iteration_;
    return row;
}

CheckpointRecord Trainer::snapshot() const { return {iteration_, round_to_f32(net_.export_parameters())}; }

void Trainer::maybe_checkpoint(int target) {
    if (!checkpoints_.empty() && checkpoints_.back().iteration == iteration_) return;
    if (iteration_ % cfg_.checkpoint_stride == 0 || iteration_ == target) checkpoints_.push_back(snapshot());
}

void Trainer::run_until(int target) {
    maybe_checkpoint(target);
    while (iteration_ < target) {
        step();
        maybe_checkpoint(target);
    }
}

TrainResult train(const RunConfig& cfg) {
    Trainer trainer(cfg);
    trainer.run_until(cfg.iterations);
    return {trainer.log(), trainer.checkpoints()};
}

std::filesystem::path checkpoint_path(const RunLayout& layout, int iteration) {
    char name[32];
    std::snprintf(name, sizeof name, "iter_%06d.ckpt", iteration);
    return layout.checkpoints() / name;
}

void write_training_artifacts(const RunConfig& cfg, const TrainResult& result, const RunLayout& layout) {
    layout.create();
    CsvTable table({"iteration", "combined_loss", "conf_loss", "box_loss"});
    for (const auto& row : result.log) {
        table.add_row({format_int(row.iteration), format_real(row.combined), format_real(row.confidence),
                       format_real(row.box)});
    }
    table.write(layout.logs() / "train_log.csv");

    const auto config_echo = to_json(cfg);
    for (const auto& rec : result.checkpoints) {
        Checkpoint ckpt;
        ckpt.meta = nlohmann::ordered_json::object();
        ckpt.meta["network"] = to_json(cfg.network);
        ckpt.meta["iteration"] = rec.iteration;
        ckpt.meta["run"] = config_echo;
        ckpt.tensors = rec.params;
        write_checkpoint(checkpoint_path(layout, rec.iteration), ckpt);
    }
}

UnitBoxNet network_at(const NetworkConfig& cfg, const CheckpointRecord& record) {
    UnitBoxNet net(cfg);
    net.import_parameters(record.params);
    return net;
}

}  // namespace unitbox
