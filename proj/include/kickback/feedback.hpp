#pragma once

// Per-node feedback signals. Backprop's delta_j is the recursive error
// signal; Kickback replaces it with beta * tau_j, the global error times the
// node's influence on the next layer only.
//
// Scalar-output convention: the standard regression network has a +/- output
// pair, but per example only the node whose sign matches the target carries
// the error (the other is seeded with zero). Feedback-path quantities (delta,
// pi, and Kickback's tau at the last hidden layer) therefore treat that node
// as the network's scalar output; paths through the off-sign node do not
// exist for that example. The unrestricted next-layer influence of Def-2 form
// stays available via influence() and is what the coherence diagnostics use.

#include <cstddef>
#include <vector>

#include "kickback/network.hpp"

namespace kickback {

enum class Algorithm : std::uint8_t { Backprop, Kickback };

/// Global error beta = dE/dx_o together with the output node that carries it.
struct ErrorSignal {
    double beta = 0.0;
    std::size_t output_node = 0;
};

/// Per-hidden-node scalars, indexed [hidden layer][node]; hidden layer h
/// corresponds to network layer h+1.
struct FeedbackField {
    double beta = 0.0;
    Algorithm algorithm = Algorithm::Backprop;
    std::vector<std::vector<double>> values;
};

struct InfluenceField {
    // tau: influence on the next layer, with the output boundary restricted
    // to the designated output node. pi: total influence, the sum over all
    // paths to that node; pi == tau on the last hidden layer.
    std::vector<std::vector<double>> tau;
    std::vector<std::vector<double>> pi;
};

/// beta = x_o - y on the output node whose sign matches sign(y); the positive
/// node handles y == 0.
ErrorSignal global_error(const Network& net, const ActivationTrace& trace, double target);

/// Exact Backprop: delta_o = beta on the seeded output node, zero on the
/// other; hidden delta_j = sum_k w_jk * 1_k * delta_k.
FeedbackField backprop_deltas(const Network& net, const ActivationTrace& trace,
                              const ErrorSignal& err);

/// Next-layer influence tau_j = sum over all real next-layer targets of
/// w_jk * 1_k (no output restriction; the coherence-facing quantity).
std::vector<std::vector<double>> influence(const Network& net, const ActivationTrace& trace);

/// tau and pi with respect to the designated output node.
InfluenceField total_influence(const Network& net, const ActivationTrace& trace,
                               std::size_t output_node);

/// Kickback: eps_j = rescale[layer] * beta * tau_j. `rescale` has one
/// positive factor per hidden layer (last conventionally 1.0). With exactly
/// one hidden layer and rescale 1 this reproduces backprop_deltas bit for
/// bit.
FeedbackField kickback_feedback(const Network& net, const ActivationTrace& trace,
                                const ErrorSignal& err, std::span<const double> rescale);

/// max over hidden nodes of |delta_j - beta * pi_j|; near zero in double
/// precision whenever the output seed is a single scalar.
double factorization_residual(const Network& net, const ActivationTrace& trace,
                              const ErrorSignal& err);

} // namespace kickback
