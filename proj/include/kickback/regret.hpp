#pragma once

// Online learning for a single rectifier node: projected gradient descent on
// rectilinear losses against arbitrary (input, feedback) sequences. The node
// only learns on the steps where it fires; per-firing regret against the
// best fixed weight vector in the l2 ball is compared with sqrt(8*D*E/|F|).

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "kickback/network.hpp"

namespace kickback {

enum class StepSchedule : std::uint8_t { Constant, InverseSqrt };

enum class Adversary : std::uint8_t {
    None,              // feedback taken from `phis`
    SignOfPreactivation  // phi_t = sign(<w_t, x_t>), realized during the run
};

struct RegretExperiment {
    std::vector<std::vector<double>> inputs;
    std::vector<double> phis;  // ignored under an adversary
    Adversary adversary = Adversary::None;
    double radius = 1.0;
    std::vector<double> w_init;  // must lie inside the ball
    StepSchedule schedule = StepSchedule::InverseSqrt;
    // Constant: the learning rate. InverseSqrt: eta_t = c / sqrt(t); c <= 0
    // selects c = sqrt(E_cap / D_t) with D_t the running gradient-norm max.
    double schedule_param = 0.0;
    Sign sign = Sign::Positive;
    // rectilinear grid comparator (dimension <= 4 only)
    bool rectilinear_comparator = false;
    std::size_t grid_resolution = 41;
};

struct RegretTrace {
    std::vector<std::size_t> firing_steps;
    std::vector<double> realized_phis;
    std::vector<double> final_w;
    double cumulative_loss = 0.0;
    double comparator_linear_loss = 0.0;
    double regret_per_firing_linear = 0.0;
    std::optional<double> comparator_rect_loss;
    std::optional<double> regret_per_firing_rect;
    double D = 0.0;      // max ||phi * x||^2 over firing steps
    double E_cap = 0.0;  // radius^2 - ||w_init||^2
    double bound = 0.0;  // sqrt(8 D E / |F|); NaN when |F| = 0
};

RegretTrace run_online_node(const RegretExperiment& exp);

struct Comparator {
    std::vector<double> w;
    double loss = 0.0;
};

/// Closed-form minimizer of the linear loss sum over the firing steps:
/// w* = -radius * g / ||g|| with g = s * sum phi_t x_t; the origin when g = 0.
Comparator best_in_hindsight_linear(std::span<const std::vector<double>> xs,
                                    std::span<const double> phis, Sign sign, double radius);

/// Grid search over the ball for the rectilinear comparator (dimension <= 4).
Comparator best_in_hindsight_rectilinear(std::span<const std::vector<double>> xs,
                                         std::span<const double> phis, Sign sign, double radius,
                                         std::size_t grid_resolution);

/// sqrt(8 * D * E / f_count)
double regret_bound(double d_max, double e_cap, std::size_t f_count);

} // namespace kickback
