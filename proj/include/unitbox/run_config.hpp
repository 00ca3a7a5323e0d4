#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "unitbox/loss_layers.hpp"
#include "unitbox/network.hpp"
#include "unitbox/optimizer.hpp"
#include "unitbox/postprocess.hpp"
#include "unitbox/synth_data.hpp"

namespace unitbox {

inline constexpr int kConfigVersion = 1;

/// Everything that determines a training run. Every field has a documented
/// default and every seed is explicit.
struct RunConfig {
    std::string name = "run";
    SynthConfig data;
    NetworkConfig network;
    PostprocessConfig postprocess;
    BoxLossKind loss = BoxLossKind::iou;
    OptimizerConfig optimizer;
    double box_weight = 1.0;
    int iterations = 3000;
    int checkpoint_stride = 250;
    std::uint64_t data_seed = 1;
    std::uint64_t eval_seed = 2;
    int eval_scenes = 200;
    std::string output_dir = "runs";

    void validate() const;

    friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Raised for malformed configuration; what() starts with the offending field path.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

nlohmann::ordered_json to_json(const RunConfig& cfg);
nlohmann::ordered_json to_json(const NetworkConfig& cfg);

/// Strict parse: unknown keys, wrong types and out-of-range values throw
/// ConfigError. Missing keys keep their defaults.
RunConfig run_config_from_json(const nlohmann::json& j);
NetworkConfig network_config_from_json(const nlohmann::json& j, const std::string& path = "network");

RunConfig load_run_config(const std::filesystem::path& file);

/// runs/<name>/{checkpoints,logs,curves,dumps}
struct RunLayout {
    std::filesystem::path root;
    std::filesystem::path checkpoints() const { return root / "checkpoints"; }
    std::filesystem::path logs() const { return root / "logs"; }
    std::filesystem::path curves() const { return root / "curves"; }
    std::filesystem::path dumps() const { return root / "dumps"; }

    void create() const;
};

RunLayout run_layout(const RunConfig& cfg);

}  // namespace unitbox
