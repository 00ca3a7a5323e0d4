#include "unitbox/run_config.hpp"

#include <fstream>
#include <set>

namespace unitbox {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

// Reads fields of one JSON object, remembering which keys were consumed so
// that leftovers can be reported as unknown.
class ObjectReader {
public:
    ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) fail(path_, "expected an object");
    }

    template <typename T>
    void read(const char* key, T& out) {
        seen_.insert(key);
        auto it = j_.find(key);
        if (it == j_.end()) return;
        const std::string field = child(key);
        if constexpr (std::is_same_v<T, bool>) {
            if (!it->is_boolean()) fail(field, "expected a boolean");
        } else if constexpr (std::is_integral_v<T>) {
            if (!it->is_number_integer()) fail(field, "expected an integer");
            if constexpr (std::is_unsigned_v<T>) {
                if (it->is_number_integer() && !it->is_number_unsigned()) fail(field, "expected a non-negative integer");
            }
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!it->is_number()) fail(field, "expected a number");
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!it->is_string()) fail(field, "expected a string");
        }
        out = it->get<T>();
    }

    void read_int_list(const char* key, std::vector<int>& out) {
        seen_.insert(key);
        auto it = j_.find(key);
        if (it == j_.end()) return;
        const std::string field = child(key);
        if (!it->is_array()) fail(field, "expected an array of integers");
        std::vector<int> values;
        for (std::size_t i = 0; i < it->size(); ++i) {
            if (!(*it)[i].is_number_integer()) fail(field + "[" + std::to_string(i) + "]", "expected an integer");
            values.push_back((*it)[i].get<int>());
        }
        out = std::move(values);
    }

    const json* object(const char* key) {
        seen_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            if (!seen_.contains(it.key())) fail(child(it.key()), "unknown key");
        }
    }

    std::string child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    [[noreturn]] static void fail(const std::string& field, const std::string& what) {
        throw ConfigError(field + ": " + what);
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

// Re-labels validation errors from the domain types with a config path.
template <typename F>
void validated(const std::string& path, F&& check) {
    try {
        check();
    } catch (const std::invalid_argument& e) {
        std::string msg = e.what();
        // domain messages already start with "<section>.<field>: ..."
        throw ConfigError(msg.rfind(path, 0) == 0 ? msg : path + ": " + msg);
    }
}

SynthConfig synth_from_json(const json& j, const std::string& path) {
    SynthConfig c;
    ObjectReader r(j, path);
    r.read("height", c.height);
    r.read("width", c.width);
    r.read("min_objects", c.min_objects);
    r.read("max_objects", c.max_objects);
    r.read("min_size", c.min_size);
    r.read("max_size", c.max_size);
    r.read("background", c.background);
    r.read("min_contrast", c.min_contrast);
    r.read("max_contrast", c.max_contrast);
    r.read("noise", c.noise);
    r.read("max_pair_iou", c.max_pair_iou);
    r.read("min_gap", c.min_gap);
    r.read("positive_shrink", c.positive_shrink);
    r.read("batch", c.batch);
    r.read("max_attempts", c.max_attempts);
    r.finish();
    validated(path, [&] { c.validate(); });
    return c;
}

ordered_json to_json(const SynthConfig& c) {
    return ordered_json{{"height", c.height},
                        {"width", c.width},
                        {"min_objects", c.min_objects},
                        {"max_objects", c.max_objects},
                        {"min_size", c.min_size},
                        {"max_size", c.max_size},
                        {"background", c.background},
                        {"min_contrast", c.min_contrast},
                        {"max_contrast", c.max_contrast},
                        {"noise", c.noise},
                        {"max_pair_iou", c.max_pair_iou},
                        {"min_gap", c.min_gap},
                        {"positive_shrink", c.positive_shrink},
                        {"batch", c.batch},
                        {"max_attempts", c.max_attempts}};
}

OptimizerConfig optimizer_from_json(const json& j, const std::string& path) {
    OptimizerConfig c;
    ObjectReader r(j, path);
    r.read("learning_rate", c.learning_rate);
    r.read("momentum", c.momentum);
    r.read("weight_decay", c.weight_decay);
    r.finish();
    validated(path, [&] { c.validate(); });
    return c;
}

PostprocessConfig postprocess_from_json(const json& j, const std::string& path) {
    PostprocessConfig c;
    ObjectReader r(j, path);
    r.read("threshold", c.threshold);
    r.read("min_area", c.min_area);
    r.read("nms_iou", c.nms_iou);
    r.finish();
    validated(path, [&] { c.validate(); });
    return c;
}

}  // namespace

ordered_json to_json(const NetworkConfig& c) {
    return ordered_json{{"stem_channels", c.stem_channels},   {"convs_per_stage", c.convs_per_stage},
                        {"downsample", c.downsample},         {"conf_tap_stage", c.conf_tap_stage},
                        {"box_tap_stage", c.box_tap_stage},   {"head_kernel", c.head_kernel},
                        {"box_bias_init", c.box_bias_init},   {"seed", c.seed}};
}

NetworkConfig network_config_from_json(const json& j, const std::string& path) {
    NetworkConfig c;
    ObjectReader r(j, path);
    r.read_int_list("stem_channels", c.stem_channels);
    r.read("convs_per_stage", c.convs_per_stage);
    r.read("downsample", c.downsample);
    r.read("conf_tap_stage", c.conf_tap_stage);
    r.read("box_tap_stage", c.box_tap_stage);
    r.read("head_kernel", c.head_kernel);
    r.read("box_bias_init", c.box_bias_init);
    r.read("seed", c.seed);
    r.finish();
    validated(path, [&] { c.validate(); });
    return c;
}

void RunConfig::validate() const {
    if (name.empty() || name.find('/') != std::string::npos) {
        throw std::invalid_argument("name: must be a non-empty single path component");
    }
    data.validate();
    network.validate();
    postprocess.validate();
    optimizer.validate();
    if (box_weight < 0.0) throw std::invalid_argument("box_weight: must be >= 0");
    if (iterations < 0) throw std::invalid_argument("iterations: must be >= 0");
    if (checkpoint_stride < 1) throw std::invalid_argument("checkpoint_stride: must be >= 1");
    if (eval_scenes < 1) throw std::invalid_argument("eval_scenes: must be >= 1");
    if (data_seed == eval_seed) throw std::invalid_argument("eval_seed: must differ from data_seed");
}

ordered_json to_json(const RunConfig& c) {
    return ordered_json{{"config_version", kConfigVersion},
                        {"name", c.name},
                        {"loss", std::string(to_string(c.loss))},
                        {"box_weight", c.box_weight},
                        {"iterations", c.iterations},
                        {"checkpoint_stride", c.checkpoint_stride},
                        {"data_seed", c.data_seed},
                        {"eval_seed", c.eval_seed},
                        {"eval_scenes", c.eval_scenes},
                        {"output_dir", c.output_dir},
                        {"data", to_json(c.data)},
                        {"network", to_json(c.network)},
                        {"optimizer",
                         {{"learning_rate", c.optimizer.learning_rate},
                          {"momentum", c.optimizer.momentum},
                          {"weight_decay", c.optimizer.weight_decay}}},
                        {"postprocess",
                         {{"threshold", c.postprocess.threshold},
                          {"min_area", c.postprocess.min_area},
                          {"nms_iou", c.postprocess.nms_iou}}}};
}

RunConfig run_config_from_json(const json& j) {
    RunConfig c;
    ObjectReader r(j, "");
    int version = 0;
    if (!j.is_object() || !j.contains("config_version")) ObjectReader::fail("config_version", "required field missing");
    r.read("config_version", version);
    if (version != kConfigVersion) {
        ObjectReader::fail("config_version", "unsupported version " + std::to_string(version) + " (expected " +
                                                 std::to_string(kConfigVersion) + ")");
    }
    r.read("name", c.name);
    std::string loss = std::string(to_string(c.loss));
    r.read("loss", loss);
    try {
        c.loss = parse_box_loss_kind(loss);
    } catch (const std::invalid_argument& e) {
        ObjectReader::fail("loss", e.what());
    }
    r.read("box_weight", c.box_weight);
    r.read("iterations", c.iterations);
    r.read("checkpoint_stride", c.checkpoint_stride);
    r.read("data_seed", c.data_seed);
    r.read("eval_seed", c.eval_seed);
    r.read("eval_scenes", c.eval_scenes);
    r.read("output_dir", c.output_dir);
    if (const json* d = r.object("data")) c.data = synth_from_json(*d, "data");
    if (const json* n = r.object("network")) c.network = network_config_from_json(*n, "network");
    if (const json* o = r.object("optimizer")) c.optimizer = optimizer_from_json(*o, "optimizer");
    if (const json* p = r.object("postprocess")) c.postprocess = postprocess_from_json(*p, "postprocess");
    r.finish();
    validated("", [&] { c.validate(); });
    return c;
}

RunConfig load_run_config(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError(file.string() + ": cannot open config file");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(file.string() + ": " + e.what());
    }
    return run_config_from_json(j);
}

void RunLayout::create() const {
    for (const auto& dir : {checkpoints(), logs(), curves(), dumps()}) std::filesystem::create_directories(dir);
}

RunLayout run_layout(const RunConfig& cfg) { return {std::filesystem::path(cfg.output_dir) / cfg.name}; }

}  // namespace unitbox
