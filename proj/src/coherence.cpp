#include "kickback/coherence.hpp"

#include <cmath>

#include "kickback/errors.hpp"
#include "kickback/feedback.hpp"
#include "kickback/kernels.hpp"

namespace kickback {

double layer_coherence(const Network& net, const ActivationTrace& trace, std::size_t layer) {
    if (layer < 1 || layer > net.num_hidden_layers())
        throw ConfigError("layer " + std::to_string(layer) + " is not a hidden layer");
    const Matrix& w = net.weights[layer];
    const std::vector<double>& fire = trace.firing[layer];
    const std::size_t n = net.layer_sizes[layer];
    std::vector<double> tau(n);
    for (std::size_t j = 0; j < n; ++j)
        tau[j] = kernels::dot(w.row(j), fire.data(), w.cols);
    const double denom = kernels::sum_abs(tau.data(), n);
    if (denom == 0.0) return 0.0;
    return kernels::sum(tau.data(), n) / denom;
}

CoherenceCheck is_coherent(const Network& net, const ActivationTrace& trace) {
    CoherenceCheck check;
    const auto tau = influence(net, trace);
    for (std::size_t h = 0; h < tau.size(); ++h)
        for (std::size_t j = 0; j < tau[h].size(); ++j)
            if (!(tau[h][j] > 0.0)) check.violations.push_back({h + 1, j});
    check.coherent = check.violations.empty();
    return check;
}

Network enforce_signs(Network net) {
    for (std::size_t a = 0; a < net.weights.size(); ++a) {
        Matrix& w = net.weights[a];
        for (std::size_t c = 0; c < w.cols; ++c) {
            const double f = sign_factor(net.signs[a][c]);
            for (std::size_t r = 0; r < w.rows; ++r)
                w(r, c) = f * std::fabs(w(r, c));
        }
    }
    return net;
}

bool satisfies_sign_constraints(const Network& net) {
    for (std::size_t a = 0; a < net.weights.size(); ++a) {
        const Matrix& w = net.weights[a];
        for (std::size_t c = 0; c < w.cols; ++c) {
            const double f = sign_factor(net.signs[a][c]);
            for (std::size_t r = 0; r < w.rows; ++r)
                if (w(r, c) * f < 0.0) return false;
        }
    }
    return true;
}

CoherenceReport coherence_probe(const Network& net,
                                std::span<const std::vector<double>> probes) {
    if (probes.empty()) throw ConfigError("coherence probe set is empty");
    const std::size_t H = net.num_hidden_layers();

    CoherenceReport report;
    report.n_probe = probes.size();
    report.per_layer.assign(H, 0.0);
    report.per_node_tau.resize(H);
    for (std::size_t h = 0; h < H; ++h)
        report.per_node_tau[h].assign(net.layer_sizes[h + 1], 0.0);

    std::size_t hidden_total = 0;
    for (std::size_t h = 0; h < H; ++h) hidden_total += net.layer_sizes[h + 1];

    double coherent_fraction_sum = 0.0;
    for (const auto& x : probes) {
        const ActivationTrace trace = forward(net, x);
        const auto tau = influence(net, trace);
        std::size_t coherent_nodes = 0;
        for (std::size_t h = 0; h < H; ++h) {
            const std::size_t n = tau[h].size();
            const double denom = kernels::sum_abs(tau[h].data(), n);
            report.per_layer[h] += denom == 0.0 ? 0.0 : kernels::sum(tau[h].data(), n) / denom;
            for (std::size_t j = 0; j < n; ++j) {
                report.per_node_tau[h][j] += tau[h][j];
                if (tau[h][j] > 0.0) ++coherent_nodes;
            }
        }
        coherent_fraction_sum +=
            static_cast<double>(coherent_nodes) / static_cast<double>(hidden_total);
    }

    const double inv = 1.0 / static_cast<double>(probes.size());
    for (double& v : report.per_layer) v *= inv;
    for (auto& layer : report.per_node_tau) kernels::scale(layer.data(), inv, layer.size());
    report.fraction_coherent = coherent_fraction_sum * inv;
    return report;
}

} // namespace kickback
