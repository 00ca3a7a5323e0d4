#include "unitbox/network.hpp"

#include <map>
#include <random>
#include <stdexcept>

namespace unitbox {

namespace {

// Total padding that makes (size + pad) == 1 (mod stride), so that feature
// cell i sits on padded pixel i * stride and corner-aligned upsampling of the
// feature map lands exactly on the padded grid.
int alignment_padding(int size, int stride) {
    int pad = 0;
    while ((size + pad) % stride != 1 % stride) ++pad;
    return pad;
}

}  // namespace

void NetworkConfig::validate() const {
    if (stem_channels.empty()) throw std::invalid_argument("network.stem_channels: must not be empty");
    for (int c : stem_channels) {
        if (c < 1) throw std::invalid_argument("network.stem_channels: widths must be positive");
    }
    const int stages = static_cast<int>(stem_channels.size());
    if (convs_per_stage < 1) throw std::invalid_argument("network.convs_per_stage: must be >= 1");
    if (downsample < 1 || downsample > 3) throw std::invalid_argument("network.downsample: must be in [1, 3]");
    if (conf_tap_stage < 1 || conf_tap_stage > stages) {
        throw std::invalid_argument("network.conf_tap_stage: must be in [1, " + std::to_string(stages) + "]");
    }
    if (box_tap_stage < 1 || box_tap_stage > stages) {
        throw std::invalid_argument("network.box_tap_stage: must be in [1, " + std::to_string(stages) + "]");
    }
    if (box_tap_stage < conf_tap_stage) {
        throw std::invalid_argument("network.box_tap_stage: must not be shallower than conf_tap_stage");
    }
    if (head_kernel < 1 || head_kernel % 2 == 0) {
        throw std::invalid_argument("network.head_kernel: must be a positive odd number");
    }
    if (box_bias_init < 0.0) throw std::invalid_argument("network.box_bias_init: must be >= 0");
}

int tap_stride(const NetworkConfig& cfg, int stage) {
    int s = 1;
    for (int i = 0; i < stage; ++i) s *= cfg.downsample;
    return s;
}

ReceptiveFields receptive_fields(const NetworkConfig& cfg) {
    cfg.validate();
    // rf[s] is the receptive field after stage s; jump is the stride at that point.
    std::vector<int> rf(cfg.stem_channels.size() + 1, 1);
    int field = 1;
    int jump = 1;
    for (std::size_t s = 0; s < cfg.stem_channels.size(); ++s) {
        for (int k = 0; k < cfg.convs_per_stage; ++k) {
            field += 2 * jump;
            if (k == 0) jump *= cfg.downsample;
        }
        rf[s + 1] = field;
    }
    const auto head = [&](int stage) {
        return rf[static_cast<std::size_t>(stage)] + (cfg.head_kernel - 1) * tap_stride(cfg, stage);
    };
    return {head(cfg.conf_tap_stage), head(cfg.box_tap_stage)};
}

UnitBoxNet::UnitBoxNet(NetworkConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    int in_c = 1;
    for (int width : cfg_.stem_channels) {
        for (int k = 0; k < cfg_.convs_per_stage; ++k) {
            const int stride = k == 0 ? cfg_.downsample : 1;
            stem_.emplace_back(in_c, width, 3, Conv2dParams{stride, 1});
            in_c = width;
        }
    }
    const int hk = cfg_.head_kernel;
    conf_head_ = Conv2d(cfg_.stem_channels[static_cast<std::size_t>(cfg_.conf_tap_stage - 1)], 1, hk,
                        Conv2dParams{1, hk / 2});
    box_head_ = Conv2d(cfg_.stem_channels[static_cast<std::size_t>(cfg_.box_tap_stage - 1)], 4, hk,
                       Conv2dParams{1, hk / 2});

    std::mt19937_64 rng(cfg_.seed);
    for (auto& conv : stem_) conv.init_uniform(rng);
    conf_head_.init_uniform(rng);
    box_head_.init_uniform(rng);
    box_head_.bias().fill(cfg_.box_bias_init);
}

NetworkOutput UnitBoxNet::run(const Tensor& images, Cache* cache) const {
    const Shape& s = images.shape();
    if (s.c != 1) throw std::invalid_argument("UnitBoxNet: expected N x 1 x H x W images, got " + s.str());
    if (s.h < 1 || s.w < 1) throw std::invalid_argument("UnitBoxNet: empty image");

    const int max_stride = tap_stride(cfg_, cfg_.box_tap_stage);
    const int pad_h = alignment_padding(s.h, max_stride);
    const int pad_w = alignment_padding(s.w, max_stride);
    const int top = pad_h / 2;
    const int left = pad_w / 2;

    Tensor x = pad_forward(images, top, pad_h - top, left, pad_w - left);
    if (cache) {
        cache->in_h = s.h;
        cache->in_w = s.w;
        cache->pad_top = top;
        cache->pad_left = left;
        cache->padded = x;
        cache->conv_in.clear();
        cache->conv_pre.clear();
    }

    Tensor conf_tap;
    Tensor box_tap;
    for (std::size_t i = 0; i < stem_.size(); ++i) {
        Tensor pre = stem_[i].forward(x);
        if (cache) {
            cache->conv_in.push_back(std::move(x));
            cache->conv_pre.push_back(pre);
        }
        x = relu_forward(pre);
        const int layer = static_cast<int>(i) + 1;
        if (layer == stage_end(cfg_.conf_tap_stage)) conf_tap = x;
        if (layer == stage_end(cfg_.box_tap_stage)) box_tap = x;
    }

    const auto upsample_crop = [&](const Tensor& feat, int stage, Tensor* up_cache) {
        const int stride = tap_stride(cfg_, stage);
        const int uh = (feat.shape().h - 1) * stride + 1;
        const int uw = (feat.shape().w - 1) * stride + 1;
        Tensor up = bilinear_upsample_forward(feat, uh, uw);
        Tensor out = crop_align_forward(up, s.h, s.w);
        if (up_cache) *up_cache = std::move(up);
        return out;
    };

    NetworkOutput out;
    Tensor conf_feat = conf_head_.forward(conf_tap);
    out.conf_logits = upsample_crop(conf_feat, cfg_.conf_tap_stage, cache ? &cache->conf_up : nullptr);

    Tensor box_pre = box_head_.forward(box_tap);
    Tensor box_feat = relu_forward(box_pre);
    out.box = upsample_crop(box_feat, cfg_.box_tap_stage, cache ? &cache->box_up : nullptr);

    if (cache) {
        cache->conf_feat = std::move(conf_feat);
        cache->box_pre = std::move(box_pre);
        cache->box_feat = std::move(box_feat);
    }
    return out;
}

NetworkOutput UnitBoxNet::forward(const Tensor& images) {
    NetworkOutput out = run(images, &cache_);
    has_cache_ = true;
    return out;
}

NetworkOutput UnitBoxNet::predict(const Tensor& images) const { return run(images, nullptr); }

std::vector<bool> UnitBoxNet::relu_gates(const Tensor& images) const {
    Cache c;
    run(images, &c);
    std::vector<bool> gates;
    for (const auto& pre : c.conv_pre) {
        for (double v : pre.data()) gates.push_back(v > 0.0);
    }
    for (double v : c.box_pre.data()) gates.push_back(v > 0.0);
    return gates;
}

void UnitBoxNet::backward(const Tensor& grad_conf, const Tensor& grad_box) {
    if (!has_cache_) throw std::logic_error("UnitBoxNet::backward called before forward");
    const Cache& c = cache_;
    const int n = c.padded.shape().n;
    require_same_shape(grad_conf.shape(), Shape{n, 1, c.in_h, c.in_w}, "UnitBoxNet::backward(grad_conf)");
    require_same_shape(grad_box.shape(), Shape{n, 4, c.in_h, c.in_w}, "UnitBoxNet::backward(grad_box)");

    const auto crop_up_backward = [&](const Tensor& g, const Tensor& up, const Tensor& feat) {
        Tensor gu = crop_align_backward(g, up.shape().h, up.shape().w);
        return bilinear_upsample_backward(gu, feat.shape().h, feat.shape().w);
    };

    Tensor g_conf_feat = crop_up_backward(grad_conf, c.conf_up, c.conf_feat);
    const std::size_t conf_idx = static_cast<std::size_t>(stage_end(cfg_.conf_tap_stage) - 1);
    Tensor g_conf_tap = conf_head_.backward(relu_forward(c.conv_pre[conf_idx]), g_conf_feat);

    Tensor g_box_feat = crop_up_backward(grad_box, c.box_up, c.box_feat);
    Tensor g_box_pre = relu_backward(c.box_pre, g_box_feat);
    const std::size_t box_idx = static_cast<std::size_t>(stage_end(cfg_.box_tap_stage) - 1);
    Tensor g_box_tap = box_head_.backward(relu_forward(c.conv_pre[box_idx]), g_box_pre);

    // Walk the stem backwards, injecting head gradients at their taps.
    Tensor g;
    for (std::size_t i = stem_.size(); i-- > 0;) {
        if (i == box_idx) {
            if (g.size() == 0) g = Tensor(g_box_tap.shape());
            for (std::size_t k = 0; k < g.size(); ++k) g[k] += g_box_tap[k];
        }
        if (i == conf_idx) {
            if (g.size() == 0) g = Tensor(g_conf_tap.shape());
            for (std::size_t k = 0; k < g.size(); ++k) g[k] += g_conf_tap[k];
        }
        if (g.size() == 0) continue;  // above both taps
        Tensor g_pre = relu_backward(c.conv_pre[i], g);
        g = stem_[i].backward(c.conv_in[i], g_pre);
    }
}

void UnitBoxNet::zero_grad() {
    for (auto& conv : stem_) conv.zero_grad();
    conf_head_.zero_grad();
    box_head_.zero_grad();
}

std::vector<ParamRef> UnitBoxNet::parameters() {
    std::vector<ParamRef> params;
    for (std::size_t i = 0; i < stem_.size(); ++i) {
        const std::string base = "stem." + std::to_string(i);
        params.push_back({base + ".weight", &stem_[i].weights(), &stem_[i].weight_grad()});
        params.push_back({base + ".bias", &stem_[i].bias(), &stem_[i].bias_grad()});
    }
    params.push_back({"conf_head.weight", &conf_head_.weights(), &conf_head_.weight_grad()});
    params.push_back({"conf_head.bias", &conf_head_.bias(), &conf_head_.bias_grad()});
    params.push_back({"box_head.weight", &box_head_.weights(), &box_head_.weight_grad()});
    params.push_back({"box_head.bias", &box_head_.bias(), &box_head_.bias_grad()});
    return params;
}

std::vector<NamedTensor> UnitBoxNet::export_parameters() const {
    std::vector<NamedTensor> out;
    for (std::size_t i = 0; i < stem_.size(); ++i) {
        const std::string base = "stem." + std::to_string(i);
        out.push_back({base + ".weight", stem_[i].weights()});
        out.push_back({base + ".bias", stem_[i].bias()});
    }
    out.push_back({"conf_head.weight", conf_head_.weights()});
    out.push_back({"conf_head.bias", conf_head_.bias()});
    out.push_back({"box_head.weight", box_head_.weights()});
    out.push_back({"box_head.bias", box_head_.bias()});
    return out;
}

void UnitBoxNet::import_parameters(const std::vector<NamedTensor>& tensors) {
    std::map<std::string, const Tensor*> by_name;
    for (const auto& t : tensors) {
        if (!by_name.emplace(t.name, &t.value).second) {
            throw std::invalid_argument("duplicate parameter '" + t.name + "'");
        }
    }
    auto params = parameters();
    if (by_name.size() != params.size()) {
        throw std::invalid_argument("parameter count mismatch: expected " + std::to_string(params.size()) + ", got " +
                                    std::to_string(by_name.size()));
    }
    for (auto& p : params) {
        auto it = by_name.find(p.name);
        if (it == by_name.end()) throw std::invalid_argument("missing parameter '" + p.name + "'");
        require_same_shape(p.value->shape(), it->second->shape(), p.name.c_str());
    }
    for (auto& p : params) *p.value = *by_name.at(p.name);
}

std::size_t UnitBoxNet::parameter_count() const {
    std::size_t n = 0;
    for (const auto& t : export_parameters()) n += t.value.size();
    return n;
}

}  // namespace unitbox
