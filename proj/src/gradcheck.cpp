#include "unitbox/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "unitbox/layers.hpp"
#include "unitbox/loss_layers.hpp"

namespace unitbox {

std::vector<double> central_difference(const std::function<double(std::span<const double>)>& f,
                                       std::span<const double> x, double h) {
    if (!(h > 0.0)) throw std::invalid_argument("central_difference: h must be positive");
    std::vector<double> point(x.begin(), x.end());
    std::vector<double> grad(point.size());
    for (std::size_t k = 0; k < point.size(); ++k) {
        const double saved = point[k];
        point[k] = saved + h;
        const double up = f(point);
        point[k] = saved - h;
        const double down = f(point);
        point[k] = saved;
        grad[k] = (up - down) / (2.0 * h);
    }
    return grad;
}

double relative_error(double analytic, double numeric) {
    return std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
}

namespace {

class Accumulator {
public:
    Accumulator(std::string name, double tol) {
        report_.name = std::move(name);
        report_.tolerance = tol;
    }

    void add(double analytic, double numeric, const std::function<std::vector<double>()>& describe) {
        if (!std::isfinite(analytic) || !std::isfinite(numeric)) {
            report_.non_finite = true;
            return;
        }
        const double e = relative_error(analytic, numeric);
        sum_ += e;
        ++components_;
        if (e > report_.max_rel_error || report_.worst_input.empty()) {
            report_.max_rel_error = std::max(report_.max_rel_error, e);
            report_.worst_input = describe();
        }
    }

    void count_sample() { ++report_.samples; }
    void count_skipped() { ++report_.skipped; }

    GradCheckReport finish() {
        report_.mean_rel_error = components_ > 0 ? sum_ / components_ : 0.0;
        report_.pass = !report_.non_finite && report_.max_rel_error <= report_.tolerance;
        return report_;
    }

private:
    GradCheckReport report_;
    double sum_ = 0.0;
    long components_ = 0;
};

double contract(const Tensor& a, const Tensor& b) {
    double s = 0.0;
    const auto x = a.data();
    const auto y = b.data();
    for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
    return s;
}

Tensor random_tensor(Shape s, std::mt19937_64& rng, double lo, double hi) {
    Tensor t(s);
    std::uniform_real_distribution<double> u(lo, hi);
    for (double& v : t.data()) v = u(rng);
    return t;
}

// One differentiable function of several tensors.
struct Probe {
    std::vector<Tensor*> vars;
    std::function<Tensor()> forward;
    std::function<std::vector<Tensor>(const Tensor& grad_out)> backward;
};

GradCheckReport run_probe(const std::string& name, Probe& probe, std::mt19937_64& rng, double tol, double h,
                          int per_tensor) {
    Accumulator acc(name, tol);
    const Tensor out = probe.forward();
    const Tensor weights = random_tensor(out.shape(), rng, -1.0, 1.0);
    const std::vector<Tensor> analytic = probe.backward(weights);
    for (std::size_t v = 0; v < probe.vars.size(); ++v) {
        Tensor& var = *probe.vars[v];
        const std::size_t count = var.data().size();
        std::vector<std::size_t> picks(count);
        for (std::size_t i = 0; i < count; ++i) picks[i] = i;
        if (per_tensor > 0 && count > static_cast<std::size_t>(per_tensor)) {
            std::shuffle(picks.begin(), picks.end(), rng);
            picks.resize(static_cast<std::size_t>(per_tensor));
            std::sort(picks.begin(), picks.end());
        }
        for (std::size_t i : picks) {
            double& x = var.data()[i];
            const double saved = x;
            x = saved + h;
            const double up = contract(probe.forward(), weights);
            x = saved - h;
            const double down = contract(probe.forward(), weights);
            x = saved;
            acc.add(analytic[v].data()[i], (up - down) / (2.0 * h), [&] {
                return std::vector<double>{static_cast<double>(v), static_cast<double>(i), saved};
            });
            acc.count_sample();
        }
    }
    return acc.finish();
}

}  // namespace

GradCheckReport check_iou_gradients(int samples, std::uint64_t seed, double tol, double delta, double h) {
    if (samples < 0) throw std::invalid_argument("check_iou_gradients: negative sample count");
    Accumulator acc("iou_backward", tol);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.2, 10.0);
    for (int s = 0; s < samples; ++s) {
        DistanceBox pred, gt;
        for (;;) {
            for (int k = 0; k < 4; ++k) {
                pred[k] = u(rng);
                gt[k] = u(rng);
            }
            bool near_tie = false;
            for (int k = 0; k < 4; ++k) near_tie = near_tie || std::abs(pred[k] - gt[k]) < delta;
            if (!near_tie && iou_forward(pred, gt).inter >= 0.01) break;
        }
        const BoxGradient analytic = iou_backward(pred, gt, iou_forward(pred, gt));
        const std::vector<double> x{pred.top, pred.bottom, pred.left, pred.right};
        const auto numeric = central_difference(
            [&](std::span<const double> p) { return iou_forward({p[0], p[1], p[2], p[3]}, gt).loss; }, x, h);
        for (int k = 0; k < 4; ++k) {
            acc.add(analytic[k], numeric[static_cast<std::size_t>(k)], [&] {
                return std::vector<double>{pred.top, pred.bottom, pred.left, pred.right,
                                           gt.top,   gt.bottom,   gt.left,   gt.right};
            });
        }
        acc.count_sample();
    }
    return acc.finish();
}

std::string to_string(LayerKind kind) {
    switch (kind) {
        case LayerKind::conv: return "conv3x3";
        case LayerKind::conv_strided: return "conv3x3_stride2";
        case LayerKind::relu: return "relu";
        case LayerKind::upsample: return "bilinear_upsample_x2";
        case LayerKind::crop: return "crop_align";
        case LayerKind::pad: return "pad";
    }
    return "unknown";
}

std::vector<LayerKind> all_layer_kinds() {
    return {LayerKind::conv, LayerKind::conv_strided, LayerKind::relu,
            LayerKind::upsample, LayerKind::crop, LayerKind::pad};
}

GradCheckReport check_layer_gradients(LayerKind kind, Shape shape, std::uint64_t seed, double tol, double h) {
    std::mt19937_64 rng(seed);
    Tensor input = random_tensor(shape, rng, -1.0, 1.0);
    Tensor weights, bias;
    Probe probe;
    probe.vars = {&input};

    switch (kind) {
        case LayerKind::conv:
        case LayerKind::conv_strided: {
            const Conv2dParams p{kind == LayerKind::conv ? 1 : 2, 1};
            weights = random_tensor({shape.c, shape.c, 3, 3}, rng, -1.0, 1.0);
            bias = random_tensor({1, shape.c, 1, 1}, rng, -1.0, 1.0);
            probe.vars = {&input, &weights, &bias};
            probe.forward = [&, p] { return conv2d_forward(input, weights, bias, p); };
            probe.backward = [&, p](const Tensor& g) {
                Conv2dGrads grads = conv2d_backward(input, weights, g, p);
                return std::vector<Tensor>{std::move(grads.input), std::move(grads.weights), std::move(grads.bias)};
            };
            break;
        }
        case LayerKind::relu: {
            std::uniform_real_distribution<double> mag(0.1 + 2 * h, 1.0);
            std::bernoulli_distribution sign(0.5);
            for (double& v : input.data()) v = sign(rng) ? mag(rng) : -mag(rng);
            probe.forward = [&] { return relu_forward(input); };
            probe.backward = [&](const Tensor& g) { return std::vector<Tensor>{relu_backward(input, g)}; };
            break;
        }
        case LayerKind::upsample: {
            const int oh = 2 * (shape.h - 1) + 1;
            const int ow = 2 * (shape.w - 1) + 1;
            probe.forward = [&, oh, ow] { return bilinear_upsample_forward(input, oh, ow); };
            probe.backward = [&](const Tensor& g) {
                return std::vector<Tensor>{bilinear_upsample_backward(g, shape.h, shape.w)};
            };
            break;
        }
        case LayerKind::crop: {
            const int oh = std::max(1, shape.h - 3);
            const int ow = std::max(1, shape.w - 2);
            probe.forward = [&, oh, ow] { return crop_align_forward(input, oh, ow); };
            probe.backward = [&](const Tensor& g) {
                return std::vector<Tensor>{crop_align_backward(g, shape.h, shape.w)};
            };
            break;
        }
        case LayerKind::pad: {
            probe.forward = [&] { return pad_forward(input, 1, 2, 0, 1); };
            probe.backward = [&](const Tensor& g) { return std::vector<Tensor>{pad_backward(g, 1, 2, 0, 1)}; };
            break;
        }
    }
    return run_probe(to_string(kind), probe, rng, tol, h, 0);
}

GradCheckReport check_network_gradients(const NetworkConfig& cfg, Shape shape, std::uint64_t seed, double tol,
                                        int per_tensor, double h) {
    std::mt19937_64 rng(seed);
    UnitBoxNet net(cfg);
    const Tensor images = random_tensor(shape, rng, 0.0, 1.0);
    const NetworkOutput first = net.predict(images);
    const Tensor w_conf = random_tensor(first.conf_logits.shape(), rng, -1.0, 1.0);
    const Tensor w_box = random_tensor(first.box.shape(), rng, -1.0, 1.0);

    net.zero_grad();
    net.forward(images);
    net.backward(w_conf, w_box);

    Accumulator acc("network", tol);
    const auto objective = [&] {
        const NetworkOutput o = net.predict(images);
        return contract(o.conf_logits, w_conf) + contract(o.box, w_box);
    };
    const std::vector<bool> base_gates = net.relu_gates(images);
    auto params = net.parameters();
    for (std::size_t v = 0; v < params.size(); ++v) {
        Tensor& var = *params[v].value;
        const std::size_t count = var.data().size();
        std::vector<std::size_t> picks(count);
        for (std::size_t i = 0; i < count; ++i) picks[i] = i;
        if (per_tensor > 0 && count > static_cast<std::size_t>(per_tensor)) {
            std::shuffle(picks.begin(), picks.end(), rng);
            picks.resize(static_cast<std::size_t>(per_tensor));
            std::sort(picks.begin(), picks.end());
        }
        for (std::size_t i : picks) {
            double& x = var.data()[i];
            const double saved = x;
            x = saved + h;
            const double up = objective();
            const bool kink = net.relu_gates(images) != base_gates;
            x = saved - h;
            const double down = objective();
            const bool kink_down = net.relu_gates(images) != base_gates;
            x = saved;
            if (kink || kink_down) {
                acc.count_skipped();
                continue;
            }
            const double a = params[v].grad->data()[i];
            const double n = (up - down) / (2.0 * h);
            acc.add(a, n, [&] {
                return std::vector<double>{static_cast<double>(v), static_cast<double>(i), saved, a, n};
            });
            acc.count_sample();
        }
    }
    return acc.finish();
}

CsvTable gradcheck_csv(const std::vector<GradCheckReport>& reports) {
    CsvTable t({"check", "samples", "max_rel_error", "mean_rel_error", "tolerance", "pass"});
    for (const auto& r : reports) {
        t.add_row({r.name, format_int(r.samples), format_real(r.max_rel_error), format_real(r.mean_rel_error),
                   format_real(r.tolerance), r.pass ? "1" : "0"});
    }
    return t;
}

}  // namespace unitbox
