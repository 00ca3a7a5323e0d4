#include "unitbox/layers.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace unitbox {

namespace {

int conv_out_dim(int in, int kernel, Conv2dParams p) {
    if (p.stride < 1 || p.pad < 0) throw std::invalid_argument("conv2d: invalid stride/pad");
    const int span = in + 2 * p.pad - kernel;
    if (span < 0) throw std::invalid_argument("conv2d: kernel larger than padded input");
    return span / p.stride + 1;
}

void check_conv_shapes(const Shape& in, const Shape& w, const Shape* bias) {
    if (w.h != w.w) throw std::invalid_argument("conv2d: kernel must be square, got " + w.str());
    if (in.c != w.c) {
        throw std::invalid_argument("conv2d: input has " + std::to_string(in.c) + " channels, weights expect " +
                                    std::to_string(w.c));
    }
    if (bias != nullptr && !(*bias == Shape{1, w.n, 1, 1})) {
        throw std::invalid_argument("conv2d: bias shape " + bias->str() + " does not match " + w.str());
    }
}

// Column buffer rows are (c, ky, kx), columns are output pixels.
void im2col(std::span<const double> image, const Shape& s, int k, Conv2dParams p, int oh, int ow,
            std::vector<double>& col) {
    const std::size_t npix = static_cast<std::size_t>(oh) * ow;
    col.assign(static_cast<std::size_t>(s.c) * k * k * npix, 0.0);
    std::size_t row = 0;
    for (int c = 0; c < s.c; ++c) {
        const double* plane = image.data() + static_cast<std::size_t>(c) * s.h * s.w;
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx, ++row) {
                double* dst = col.data() + row * npix;
                for (int oy = 0; oy < oh; ++oy) {
                    const int iy = oy * p.stride - p.pad + ky;
                    if (iy < 0 || iy >= s.h) continue;
                    for (int ox = 0; ox < ow; ++ox) {
                        const int ix = ox * p.stride - p.pad + kx;
                        if (ix < 0 || ix >= s.w) continue;
                        dst[static_cast<std::size_t>(oy) * ow + ox] = plane[static_cast<std::size_t>(iy) * s.w + ix];
                    }
                }
            }
        }
    }
}

void col2im(const std::vector<double>& col, const Shape& s, int k, Conv2dParams p, int oh, int ow,
            std::span<double> image) {
    const std::size_t npix = static_cast<std::size_t>(oh) * ow;
    std::size_t row = 0;
    for (int c = 0; c < s.c; ++c) {
        double* plane = image.data() + static_cast<std::size_t>(c) * s.h * s.w;
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx, ++row) {
                const double* src = col.data() + row * npix;
                for (int oy = 0; oy < oh; ++oy) {
                    const int iy = oy * p.stride - p.pad + ky;
                    if (iy < 0 || iy >= s.h) continue;
                    for (int ox = 0; ox < ow; ++ox) {
                        const int ix = ox * p.stride - p.pad + kx;
                        if (ix < 0 || ix >= s.w) continue;
                        plane[static_cast<std::size_t>(iy) * s.w + ix] += src[static_cast<std::size_t>(oy) * ow + ox];
                    }
                }
            }
        }
    }
}

// Per-axis interpolation taps for corner-aligned resizing.
struct Tap {
    int i0 = 0;
    int i1 = 0;
    double frac = 0.0;
};

std::vector<Tap> linear_taps(int in, int out) {
    std::vector<Tap> taps(static_cast<std::size_t>(out));
    const double scale = out > 1 ? static_cast<double>(in - 1) / static_cast<double>(out - 1) : 0.0;
    for (int t = 0; t < out; ++t) {
        const double src = t * scale;
        int i0 = static_cast<int>(std::floor(src));
        if (i0 > in - 1) i0 = in - 1;
        const int i1 = i0 + 1 < in ? i0 + 1 : i0;
        taps[static_cast<std::size_t>(t)] = {i0, i1, src - i0};
    }
    return taps;
}

}  // namespace

Tensor conv2d_forward(const Tensor& input, const Tensor& weights, const Tensor& bias, Conv2dParams p) {
    const Shape& s = input.shape();
    const Shape& ws = weights.shape();
    check_conv_shapes(s, ws, &bias.shape());
    const int k = ws.h;
    const int oh = conv_out_dim(s.h, k, p);
    const int ow = conv_out_dim(s.w, k, p);
    const std::size_t npix = static_cast<std::size_t>(oh) * ow;
    const std::size_t rows = static_cast<std::size_t>(ws.c) * k * k;

    Tensor out({s.n, ws.n, oh, ow});
    std::vector<double> col;
    for (int n = 0; n < s.n; ++n) {
        im2col(input.data().subspan(input.index(n, 0, 0, 0), static_cast<std::size_t>(s.c) * s.plane()), s, k, p,
               oh, ow, col);
        for (int oc = 0; oc < ws.n; ++oc) {
            double* dst = out.plane(n, oc).data();
            const double b = bias[static_cast<std::size_t>(oc)];
            for (std::size_t q = 0; q < npix; ++q) dst[q] = b;
            const double* wrow = weights.data().data() + static_cast<std::size_t>(oc) * rows;
            for (std::size_t r = 0; r < rows; ++r) {
                const double wv = wrow[r];
                const double* src = col.data() + r * npix;
                for (std::size_t q = 0; q < npix; ++q) dst[q] += wv * src[q];
            }
        }
    }
    return out;
}

Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& weights, const Tensor& grad_out, Conv2dParams p) {
    const Shape& s = input.shape();
    const Shape& ws = weights.shape();
    check_conv_shapes(s, ws, nullptr);
    const int k = ws.h;
    const int oh = conv_out_dim(s.h, k, p);
    const int ow = conv_out_dim(s.w, k, p);
    require_same_shape(grad_out.shape(), Shape{s.n, ws.n, oh, ow}, "conv2d_backward(grad_out)");
    const std::size_t npix = static_cast<std::size_t>(oh) * ow;
    const std::size_t rows = static_cast<std::size_t>(ws.c) * k * k;

    Conv2dGrads g{Tensor(s), Tensor(ws), Tensor({1, ws.n, 1, 1})};
    std::vector<double> col;
    std::vector<double> dcol;
    for (int n = 0; n < s.n; ++n) {
        im2col(input.data().subspan(input.index(n, 0, 0, 0), static_cast<std::size_t>(s.c) * s.plane()), s, k, p,
               oh, ow, col);
        dcol.assign(rows * npix, 0.0);
        for (int oc = 0; oc < ws.n; ++oc) {
            const double* go = grad_out.plane(n, oc).data();
            double bsum = 0.0;
            for (std::size_t q = 0; q < npix; ++q) bsum += go[q];
            g.bias[static_cast<std::size_t>(oc)] += bsum;

            const double* wrow = weights.data().data() + static_cast<std::size_t>(oc) * rows;
            double* gwrow = g.weights.data().data() + static_cast<std::size_t>(oc) * rows;
            for (std::size_t r = 0; r < rows; ++r) {
                const double* src = col.data() + r * npix;
                double acc = 0.0;
                for (std::size_t q = 0; q < npix; ++q) acc += go[q] * src[q];
                gwrow[r] += acc;

                const double wv = wrow[r];
                double* dst = dcol.data() + r * npix;
                for (std::size_t q = 0; q < npix; ++q) dst[q] += wv * go[q];
            }
        }
        col2im(dcol, s, k, p, oh, ow,
               g.input.data().subspan(g.input.index(n, 0, 0, 0), static_cast<std::size_t>(s.c) * s.plane()));
    }
    return g;
}

Tensor relu_forward(const Tensor& input) {
    Tensor out(input.shape());
    for (std::size_t i = 0; i < input.size(); ++i) out[i] = input[i] > 0.0 ? input[i] : 0.0;
    return out;
}

Tensor relu_backward(const Tensor& input, const Tensor& grad_out) {
    require_same_shape(input.shape(), grad_out.shape(), "relu_backward");
    Tensor out(input.shape());
    for (std::size_t i = 0; i < input.size(); ++i) out[i] = input[i] > 0.0 ? grad_out[i] : 0.0;
    return out;
}

Tensor bilinear_upsample_forward(const Tensor& input, int out_h, int out_w) {
    const Shape& s = input.shape();
    if (out_h < s.h || out_w < s.w) {
        throw std::invalid_argument("bilinear_upsample: target " + std::to_string(out_h) + "x" +
                                    std::to_string(out_w) + " is smaller than source " + s.str());
    }
    const auto ty = linear_taps(s.h, out_h);
    const auto tx = linear_taps(s.w, out_w);
    Tensor out({s.n, s.c, out_h, out_w});
    for (int n = 0; n < s.n; ++n) {
        for (int c = 0; c < s.c; ++c) {
            const auto src = input.plane(n, c);
            auto dst = out.plane(n, c);
            for (int y = 0; y < out_h; ++y) {
                const Tap& a = ty[static_cast<std::size_t>(y)];
                const double* r0 = src.data() + static_cast<std::size_t>(a.i0) * s.w;
                const double* r1 = src.data() + static_cast<std::size_t>(a.i1) * s.w;
                for (int x = 0; x < out_w; ++x) {
                    const Tap& b = tx[static_cast<std::size_t>(x)];
                    const double top = r0[b.i0] + b.frac * (r0[b.i1] - r0[b.i0]);
                    const double bot = r1[b.i0] + b.frac * (r1[b.i1] - r1[b.i0]);
                    dst[static_cast<std::size_t>(y) * out_w + x] = top + a.frac * (bot - top);
                }
            }
        }
    }
    return out;
}

Tensor bilinear_upsample_backward(const Tensor& grad_out, int in_h, int in_w) {
    const Shape& s = grad_out.shape();
    if (s.h < in_h || s.w < in_w) throw std::invalid_argument("bilinear_upsample_backward: source larger than target");
    const auto ty = linear_taps(in_h, s.h);
    const auto tx = linear_taps(in_w, s.w);
    Tensor out({s.n, s.c, in_h, in_w});
    for (int n = 0; n < s.n; ++n) {
        for (int c = 0; c < s.c; ++c) {
            const auto src = grad_out.plane(n, c);
            auto dst = out.plane(n, c);
            for (int y = 0; y < s.h; ++y) {
                const Tap& a = ty[static_cast<std::size_t>(y)];
                double* r0 = dst.data() + static_cast<std::size_t>(a.i0) * in_w;
                double* r1 = dst.data() + static_cast<std::size_t>(a.i1) * in_w;
                for (int x = 0; x < s.w; ++x) {
                    const Tap& b = tx[static_cast<std::size_t>(x)];
                    const double g = src[static_cast<std::size_t>(y) * s.w + x];
                    const double gt = g * (1.0 - a.frac);
                    const double gb = g * a.frac;
                    r0[b.i0] += gt * (1.0 - b.frac);
                    r0[b.i1] += gt * b.frac;
                    r1[b.i0] += gb * (1.0 - b.frac);
                    r1[b.i1] += gb * b.frac;
                }
            }
        }
    }
    return out;
}

Tensor crop_align_forward(const Tensor& input, int out_h, int out_w) {
    const Shape& s = input.shape();
    if (out_h > s.h || out_w > s.w) {
        throw std::invalid_argument("crop_align: target " + std::to_string(out_h) + "x" + std::to_string(out_w) +
                                    " exceeds input " + s.str());
    }
    const int oy = (s.h - out_h) / 2;
    const int ox = (s.w - out_w) / 2;
    Tensor out({s.n, s.c, out_h, out_w});
    for (int n = 0; n < s.n; ++n) {
        for (int c = 0; c < s.c; ++c) {
            for (int y = 0; y < out_h; ++y) {
                for (int x = 0; x < out_w; ++x) out.at(n, c, y, x) = input.at(n, c, y + oy, x + ox);
            }
        }
    }
    return out;
}

Tensor crop_align_backward(const Tensor& grad_out, int in_h, int in_w) {
    const Shape& s = grad_out.shape();
    if (s.h > in_h || s.w > in_w) throw std::invalid_argument("crop_align_backward: crop larger than input");
    const int oy = (in_h - s.h) / 2;
    const int ox = (in_w - s.w) / 2;
    Tensor out({s.n, s.c, in_h, in_w});
    for (int n = 0; n < s.n; ++n) {
        for (int c = 0; c < s.c; ++c) {
            for (int y = 0; y < s.h; ++y) {
                for (int x = 0; x < s.w; ++x) out.at(n, c, y + oy, x + ox) = grad_out.at(n, c, y, x);
            }
        }
    }
    return out;
}

Tensor pad_forward(const Tensor& input, int top, int bottom, int left, int right) {
    if (top < 0 || bottom < 0 || left < 0 || right < 0) throw std::invalid_argument("pad: negative amount");
    const Shape& s = input.shape();
    Tensor out({s.n, s.c, s.h + top + bottom, s.w + left + right});
    for (int n = 0; n < s.n; ++n) {
        for (int c = 0; c < s.c; ++c) {
            for (int y = 0; y < s.h; ++y) {
                for (int x = 0; x < s.w; ++x) out.at(n, c, y + top, x + left) = input.at(n, c, y, x);
            }
        }
    }
    return out;
}

Tensor pad_backward(const Tensor& grad_out, int top, int bottom, int left, int right) {
    const Shape& s = grad_out.shape();
    const int h = s.h - top - bottom;
    const int w = s.w - left - right;
    if (h < 0 || w < 0) throw std::invalid_argument("pad_backward: padding exceeds gradient size");
    Tensor out({s.n, s.c, h, w});
    for (int n = 0; n < s.n; ++n) {
        for (int c = 0; c < s.c; ++c) {
            for (int y = 0; y < h; ++y) {
                for (int x = 0; x < w; ++x) out.at(n, c, y, x) = grad_out.at(n, c, y + top, x + left);
            }
        }
    }
    return out;
}

Conv2d::Conv2d(int in_channels, int out_channels, int kernel, Conv2dParams params)
    : params_(params),
      weights_({out_channels, in_channels, kernel, kernel}),
      bias_({1, out_channels, 1, 1}),
      weight_grad_({out_channels, in_channels, kernel, kernel}),
      bias_grad_({1, out_channels, 1, 1}) {
    if (in_channels < 1 || out_channels < 1 || kernel < 1) {
        throw std::invalid_argument("Conv2d: channels and kernel must be positive");
    }
}

void Conv2d::init_uniform(std::mt19937_64& rng) {
    const double fan_in = static_cast<double>(in_channels()) * kernel() * kernel();
    const double bound = std::sqrt(1.0 / fan_in);
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& v : weights_.data()) v = dist(rng);
    for (auto& v : bias_.data()) v = dist(rng);
}

Tensor Conv2d::backward(const Tensor& input, const Tensor& grad_out) {
    Conv2dGrads g = conv2d_backward(input, weights_, grad_out, params_);
    for (std::size_t i = 0; i < weight_grad_.size(); ++i) weight_grad_[i] += g.weights[i];
    for (std::size_t i = 0; i < bias_grad_.size(); ++i) bias_grad_[i] += g.bias[i];
    return std::move(g.input);
}

void Conv2d::zero_grad() {
    weight_grad_.fill(0.0);
    bias_grad_.fill(0.0);
}

}  // namespace unitbox
