#pragma once

// Coherence: a hidden node is coherent on a trace when its next-layer
// influence tau_j is strictly positive; coh(L) = sum tau / sum |tau| per
// layer. Signed weight constraints (nonnegative into positive nodes,
// nonpositive into negative nodes) guarantee coherence wherever anything
// downstream fires.

#include <cstddef>
#include <span>
#include <vector>

#include "kickback/network.hpp"

namespace kickback {

struct NodeRef {
    std::size_t layer = 0;  // network layer index (1-based over non-input layers)
    std::size_t index = 0;
};

struct CoherenceCheck {
    bool coherent = false;
    std::vector<NodeRef> violations;
};

struct CoherenceReport {
    std::vector<double> per_layer;               // coh(L) per hidden layer, probe average
    std::vector<std::vector<double>> per_node_tau;  // probe-averaged tau per hidden node
    double fraction_coherent = 0.0;              // probe-averaged fraction with tau > 0
    std::size_t n_probe = 0;
};

/// coh of one hidden layer (1-based network layer index): sum tau / sum |tau|,
/// 0 when no downstream node fires anywhere in the layer.
double layer_coherence(const Network& net, const ActivationTrace& trace, std::size_t layer);

/// True iff tau_j > 0 for every hidden node; violating nodes listed.
CoherenceCheck is_coherent(const Network& net, const ActivationTrace& trace);

/// Replaces every weight into a positive node by |w| and into a negative node
/// by -|w|. Idempotent.
Network enforce_signs(Network net);

bool satisfies_sign_constraints(const Network& net);

/// Averages layer coherence and the coherent-node fraction over probe inputs.
CoherenceReport coherence_probe(const Network& net,
                                std::span<const std::vector<double>> probes);

} // namespace kickback
