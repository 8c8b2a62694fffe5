#include "kickback/feedback.hpp"

#include <cmath>

#include "kickback/errors.hpp"
#include "kickback/kernels.hpp"

namespace kickback {

namespace {

void check_trace(const Network& net, const ActivationTrace& trace) {
    if (trace.firing.size() != net.num_layers() - 1 ||
        trace.firing.back().size() != net.output_size())
        throw ConfigError("activation trace does not match network shape");
}

} // namespace

ErrorSignal global_error(const Network& net, const ActivationTrace& trace, double target) {
    if (!std::isfinite(target)) throw NumericError("non-finite regression target");
    check_trace(net, trace);
    const std::size_t node = target < 0.0 ? net.negative_output() : net.positive_output();
    const double x_o = trace.activations.back()[node];
    return {x_o - target, node};
}

FeedbackField backprop_deltas(const Network& net, const ActivationTrace& trace,
                              const ErrorSignal& err) {
    check_trace(net, trace);
    const std::size_t L = net.num_layers();
    const std::size_t H = net.num_hidden_layers();

    FeedbackField field;
    field.beta = err.beta;
    field.algorithm = Algorithm::Backprop;
    field.values.resize(H);

    // masked deltas of the layer above: m_k = 1_k * delta_k
    std::vector<double> masked(net.output_size(), 0.0);
    masked[err.output_node] = trace.firing[L - 2][err.output_node] * err.beta;

    for (std::size_t l = L - 2; l >= 1; --l) {
        const Matrix& w = net.weights[l];
        const std::size_t n = net.layer_sizes[l];
        std::vector<double>& delta = field.values[l - 1];
        delta.resize(n);
        for (std::size_t j = 0; j < n; ++j)
            delta[j] = kernels::dot(w.row(j), masked.data(), w.cols);
        if (l == 1) break;
        masked.resize(n);
        const std::vector<double>& fire = trace.firing[l - 1];
        for (std::size_t j = 0; j < n; ++j) masked[j] = fire[j] * delta[j];
    }
    return field;
}

std::vector<std::vector<double>> influence(const Network& net, const ActivationTrace& trace) {
    check_trace(net, trace);
    const std::size_t H = net.num_hidden_layers();
    std::vector<std::vector<double>> tau(H);
    for (std::size_t l = 1; l <= H; ++l) {
        const Matrix& w = net.weights[l];
        const std::vector<double>& fire = trace.firing[l];
        std::vector<double>& t = tau[l - 1];
        t.resize(net.layer_sizes[l]);
        for (std::size_t j = 0; j < t.size(); ++j)
            t[j] = kernels::dot(w.row(j), fire.data(), w.cols);
    }
    return tau;
}

InfluenceField total_influence(const Network& net, const ActivationTrace& trace,
                               std::size_t output_node) {
    check_trace(net, trace);
    if (output_node >= net.output_size()) throw ConfigError("output node index out of range");
    const std::size_t L = net.num_layers();
    const std::size_t H = net.num_hidden_layers();

    InfluenceField field;
    field.tau.resize(H);
    field.pi.resize(H);

    // firing of the layer above, with the output layer masked to the
    // designated node
    std::vector<double> fire_above(net.output_size(), 0.0);
    fire_above[output_node] = trace.firing[L - 2][output_node];

    std::vector<double> pi_above;  // 1_k * pi_k of the layer above
    for (std::size_t l = L - 2; l >= 1; --l) {
        const Matrix& w = net.weights[l];
        const std::size_t n = net.layer_sizes[l];
        std::vector<double>& tau = field.tau[l - 1];
        std::vector<double>& pi = field.pi[l - 1];
        tau.resize(n);
        pi.resize(n);
        for (std::size_t j = 0; j < n; ++j)
            tau[j] = kernels::dot(w.row(j), fire_above.data(), w.cols);
        if (l == L - 2) {
            pi = tau;  // base case: all paths are single edges to the output
        } else {
            for (std::size_t j = 0; j < n; ++j)
                pi[j] = kernels::dot(w.row(j), pi_above.data(), w.cols);
        }
        if (l == 1) break;
        const std::vector<double>& fire = trace.firing[l - 1];
        fire_above.assign(fire.begin(), fire.end());
        pi_above.resize(n);
        for (std::size_t j = 0; j < n; ++j) pi_above[j] = fire[j] * pi[j];
    }
    return field;
}

FeedbackField kickback_feedback(const Network& net, const ActivationTrace& trace,
                                const ErrorSignal& err, std::span<const double> rescale) {
    check_trace(net, trace);
    const std::size_t L = net.num_layers();
    const std::size_t H = net.num_hidden_layers();
    if (rescale.size() != H)
        throw ConfigError("rescale needs one factor per hidden layer (" + std::to_string(H) +
                          "), got " + std::to_string(rescale.size()));
    for (double r : rescale)
        if (!(r > 0.0)) throw ConfigError("rescale factors must be positive");

    FeedbackField field;
    field.beta = err.beta;
    field.algorithm = Algorithm::Kickback;
    field.values.resize(H);

    std::vector<double> fire_above;
    for (std::size_t l = 1; l <= H; ++l) {
        const Matrix& w = net.weights[l];
        if (l == H) {
            // output boundary: only the seeded node is the scalar output
            fire_above.assign(net.output_size(), 0.0);
            fire_above[err.output_node] = trace.firing[L - 2][err.output_node];
        } else {
            const std::vector<double>& fire = trace.firing[l];
            fire_above.assign(fire.begin(), fire.end());
        }
        const double kappa = rescale[l - 1];
        std::vector<double>& eps = field.values[l - 1];
        eps.resize(net.layer_sizes[l]);
        for (std::size_t j = 0; j < eps.size(); ++j)
            eps[j] = kappa * (err.beta * kernels::dot(w.row(j), fire_above.data(), w.cols));
    }
    return field;
}

double factorization_residual(const Network& net, const ActivationTrace& trace,
                              const ErrorSignal& err) {
    const FeedbackField deltas = backprop_deltas(net, trace, err);
    const InfluenceField inf = total_influence(net, trace, err.output_node);
    double residual = 0.0;
    for (std::size_t h = 0; h < deltas.values.size(); ++h)
        for (std::size_t j = 0; j < deltas.values[h].size(); ++j)
            residual = std::max(residual,
                                std::fabs(deltas.values[h][j] - err.beta * inf.pi[h][j]));
    return residual;
}

} // namespace kickback
