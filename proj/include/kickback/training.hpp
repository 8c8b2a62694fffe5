#pragma once

// Training: hidden nodes do gradient descent on the rectilinear loss
// phi * S_w(x) with phi = delta (Backprop) or eps (Kickback); output nodes do
// rectilinear regression (the l2 activation penalty makes a firing node run
// linear regression on the inputs that cause it to fire), with the target
// routed to the output node whose sign matches it.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "kickback/data.hpp"
#include "kickback/feedback.hpp"
#include "kickback/network.hpp"

namespace kickback {

struct TrainConfig {
    Algorithm algorithm = Algorithm::Backprop;
    double learning_rate = 1e-3;
    std::vector<double> rescale;  // per hidden layer; empty means all 1.0
    InitScheme init_scheme = InitScheme::Uniform;
    std::size_t batch_size = 20;
    std::size_t epochs = 1;
    std::uint64_t seed = 1;
    std::optional<double> projection_radius;  // l2 ball per node weight vector
    bool bias_enabled = true;
    // ablation: re-impose the signed weight constraints after every batch
    // (training works without it; off by default)
    bool enforce_coherence = false;
    unsigned threads = 1;                     // batch-internal workers
    std::size_t coherence_probe = 256;        // leading test examples probed per epoch

    void validate(std::size_t hidden_layers) const;
    std::vector<double> effective_rescale(std::size_t hidden_layers) const;
};

struct MetricsRecord {
    std::size_t epoch = 0;
    double train_error = 0.0;  // MSE of the correct-sign output node
    double test_error = 0.0;   // sum of the output nodes' routed MSEs
    double nmse_train = 0.0;
    double nmse_test = 0.0;
    std::vector<double> coherence;  // per hidden layer, probe average
    std::uint64_t wall_ms = 0;
};

/// Rectilinear loss phi * S_w(x).
double rectilinear_loss(std::span<const double> w, std::span<const double> x, double phi,
                        Sign sign);

/// Gradient of the rectilinear loss in w: phi * x * 1_j (zero when not
/// firing). The descent step is -eta times this.
std::vector<double> rectilinear_gradient(std::span<const double> w, std::span<const double> x,
                                         double phi, Sign sign);

/// Update direction for output-node rectilinear regression: the applied step
/// is +eta times this. (s*phi - <w,x>) * x when firing, zero otherwise, with
/// s the node's sign factor; a firing node regresses its preactivation onto
/// s*phi, i.e. its output onto phi.
std::vector<double> output_regression_update(std::span<const double> w,
                                             std::span<const double> x, double phi, Sign sign);

void project_l2_inplace(std::span<double> w, double radius);
std::vector<double> project_l2(std::span<const double> w, double radius);

struct BatchStats {
    double batch_error = 0.0;       // mean correct-sign squared error, pre-update
    std::size_t examples = 0;
    std::size_t hidden_firing = 0;  // total (example, hidden node) firing events
};

/// One batch step: per example, forward / global error / feedback per the
/// configured algorithm; the mean accumulated update is applied once, in
/// fixed example order regardless of worker count.
BatchStats train_batch(Network& net, const Dataset& ds, std::span<const std::size_t> indices,
                       const TrainConfig& cfg);

struct Evaluation {
    double correct_sign_mse = 0.0;
    double routed_mse = 0.0;  // (x+ - max(0,y))^2 + (x- - min(0,y))^2, averaged
};

Evaluation evaluate(const Network& net, const Dataset& ds);

using EpochSink = std::function<void(const MetricsRecord&)>;

/// Full training loop; per-epoch metrics are pushed to `sink` (if any) and
/// returned. Deterministic given (net, datasets, config).
std::vector<MetricsRecord> train(Network& net, const Dataset& train_set, const Dataset& test_set,
                                 const TrainConfig& cfg, const EpochSink& sink = {});

/// Per-hidden-layer mean|delta| / mean|eps| over a probe prefix of the
/// dataset at the current weights; the proposed Kickback rescale factors.
/// Layers with no Kickback signal keep factor 1.
std::vector<double> calibrate_rescale(const Network& net, const Dataset& ds,
                                      std::size_t probe_count);

// --- Backprop gradient vs central finite differences of the network error
//     E = 0.5 * (x_eff - y)^2 on one input ---

struct GradCheckConfig {
    double step = 1e-6;
    double tolerance = 1e-5;
    double kink_margin = 10.0;   // exclude weights with an affected |a| < margin * step
    double denom_floor = 1e-4;   // relative-error denominator floor (FD noise floor)
    bool corrupt = false;        // test hook: flip one analytic gradient sign
};

struct GradCheckResult {
    double max_rel_err = 0.0;
    std::size_t checked = 0;
    std::size_t excluded = 0;
    bool pass = true;
};

GradCheckResult gradient_check(const Network& net, std::span<const double> input, double target,
                               const GradCheckConfig& cfg = {});

} // namespace kickback
