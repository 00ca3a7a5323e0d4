#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "unitbox/network.hpp"
#include "unitbox/report_io.hpp"

namespace unitbox {

/// Component k is (f(x + h e_k) - f(x - h e_k)) / 2h.
std::vector<double> central_difference(const std::function<double(std::span<const double>)>& f,
                                       std::span<const double> x, double h);

/// |a - n| / max(1e-8, |a| + |n|)
double relative_error(double analytic, double numeric);

struct GradCheckReport {
    std::string name;
    int samples = 0;
    int skipped = 0;  // probes whose perturbation crossed a non-smooth point
    double max_rel_error = 0.0;
    double mean_rel_error = 0.0;
    std::vector<double> worst_input;
    double tolerance = 0.0;
    bool non_finite = false;
    bool pass = true;
};

/// Random (pred, gt) pairs with components in [0.2, 10]; pairs with any
/// |pred_i - gt_i| < delta or intersection < 0.01 are redrawn. worst_input
/// holds the pred then gt components of the worst pair.
GradCheckReport check_iou_gradients(int samples, std::uint64_t seed, double tol, double delta, double h = 1e-3);

enum class LayerKind { conv, conv_strided, relu, upsample, crop, pad };

std::string to_string(LayerKind kind);
std::vector<LayerKind> all_layer_kinds();

/// Contracts the layer output with a random tensor and compares the backward
/// pass against central differences for every input and parameter element.
/// ReLU inputs are drawn with |x| >= 0.1.
GradCheckReport check_layer_gradients(LayerKind kind, Shape input, std::uint64_t seed, double tol, double h = 1e-3);

/// Same for a whole network, over up to `per_tensor` sampled elements of each
/// parameter tensor. Elements whose +-h perturbation flips any ReLU gate are
/// skipped and counted in `skipped`.
GradCheckReport check_network_gradients(const NetworkConfig& cfg, Shape input, std::uint64_t seed, double tol,
                                        int per_tensor = 16, double h = 1e-3);

CsvTable gradcheck_csv(const std::vector<GradCheckReport>& reports);

}  // namespace unitbox
