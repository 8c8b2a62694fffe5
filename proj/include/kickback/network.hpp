#pragma once

// Feedforward rectifier network: positive nodes emit max(0,a), negative nodes
// emit -max(0,a). A node fires when its preactivation exceeds zero; the
// signed indicator (the rectifier subgradient) is -1, 0 or +1.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace kickback {

enum class Sign : std::uint8_t { Positive, Negative };

enum class InitScheme : std::uint8_t { Uniform, Signed };

/// max(0,a) for positive nodes, -max(0,a) for negative ones.
double rectifier_output(Sign sign, double a);

/// Subgradient of the rectifier: +1 / -1 when firing, 0 otherwise (0 at the
/// kink a == 0; a node fires only on strictly positive preactivation).
int rectifier_subgradient(Sign sign, double a);

inline double sign_factor(Sign s) { return s == Sign::Positive ? 1.0 : -1.0; }

// Dense row-major matrix. Weight matrices are stored with one row per source
// node (plus a trailing bias row when biases are enabled) and one column per
// target node.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double* row(std::size_t r) { return data.data() + r * cols; }
    const double* row(std::size_t r) const { return data.data() + r * cols; }
    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

struct Network {
    std::vector<std::size_t> layer_sizes;      // input, hidden..., output
    std::vector<std::vector<Sign>> signs;      // per non-input layer
    std::vector<Matrix> weights;               // weights[a]: layer a -> a+1
    bool bias_enabled = true;

    std::size_t num_layers() const { return layer_sizes.size(); }
    std::size_t num_hidden_layers() const { return layer_sizes.size() - 2; }
    std::size_t input_size() const { return layer_sizes.front(); }
    std::size_t output_size() const { return layer_sizes.back(); }
    std::size_t bias_extra() const { return bias_enabled ? 1 : 0; }

    /// Sign of node `j` in non-input layer `layer` (1-based layer index).
    Sign node_sign(std::size_t layer, std::size_t j) const { return signs[layer - 1][j]; }

    /// True iff the output layer is the standard regression pair: two nodes,
    /// one positive and one negative.
    bool standard_output() const;
    std::size_t positive_output() const;  // throws unless standard_output()
    std::size_t negative_output() const;

    void validate() const;  // shape/finiteness invariants
};

/// Alternating sign pattern (+, -, +, ...) for every non-input layer; the
/// default "half positive, half negative" arrangement.
std::vector<std::vector<Sign>> alternating_signs(std::span<const std::size_t> layer_sizes);

/// Uniform: w ~ U(-s, s) with s = 1/sqrt(fan-in). Signed: same draws, then
/// signs flipped so weights into positive nodes are >= 0 and weights into
/// negative nodes are <= 0. Deterministic in the seed.
Network init_network(std::span<const std::size_t> layer_sizes,
                     std::vector<std::vector<Sign>> signs,
                     InitScheme scheme,
                     std::uint64_t seed,
                     bool bias_enabled = true);

/// Convenience: alternating signs, standard 2-node output appended.
Network init_standard_network(std::span<const std::size_t> hidden_sizes,
                              std::size_t input_size,
                              InitScheme scheme,
                              std::uint64_t seed,
                              bool bias_enabled = true);

struct ActivationTrace {
    // activations[l] holds layer l's outputs; layers that feed a bias-enabled
    // weight matrix carry a trailing constant 1.0 slot.
    std::vector<std::vector<double>> activations;
    // preactivations[l-1] / firing[l-1] correspond to non-input layer l.
    std::vector<std::vector<double>> preactivations;
    // signed indicators as doubles, exactly -1.0 / 0.0 / +1.0
    std::vector<std::vector<double>> firing;

    std::span<const double> layer_activations(std::size_t l, std::size_t size) const {
        return {activations[l].data(), size};
    }
};

/// Pure forward pass; `input` length must equal the input layer size.
ActivationTrace forward(const Network& net, std::span<const double> input);

/// Scalar readout of the standard 2-node output layer: x_o+ + x_o-.
double predict(const Network& net, const ActivationTrace& trace);
double predict(const Network& net, std::span<const double> input);

// --- snapshot format (versioned flat text, exact round trip) ---
void save_network(const Network& net, std::ostream& out);
void save_network(const Network& net, const std::string& path);
Network load_network(std::istream& in);
Network load_network_file(const std::string& path);

} // namespace kickback
