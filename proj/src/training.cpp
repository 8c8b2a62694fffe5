#include "kickback/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <thread>

#include "kickback/coherence.hpp"
#include "kickback/errors.hpp"
#include "kickback/kernels.hpp"

namespace kickback {

void TrainConfig::validate(std::size_t hidden_layers) const {
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
    if (!rescale.empty() && rescale.size() != hidden_layers)
        throw ConfigError("rescale needs one factor per hidden layer");
    for (double r : rescale)
        if (!(r > 0.0)) throw ConfigError("rescale factors must be positive");
    if (projection_radius && !(*projection_radius > 0.0))
        throw ConfigError("projection_radius must be positive");
}

std::vector<double> TrainConfig::effective_rescale(std::size_t hidden_layers) const {
    if (rescale.empty()) return std::vector<double>(hidden_layers, 1.0);
    return rescale;
}

double rectilinear_loss(std::span<const double> w, std::span<const double> x, double phi,
                        Sign sign) {
    if (w.size() != x.size()) throw ConfigError("rectilinear_loss: dimension mismatch");
    const double a = kernels::dot(w.data(), x.data(), w.size());
    return phi * rectifier_output(sign, a);
}

std::vector<double> rectilinear_gradient(std::span<const double> w, std::span<const double> x,
                                         double phi, Sign sign) {
    if (w.size() != x.size()) throw ConfigError("rectilinear_gradient: dimension mismatch");
    const double a = kernels::dot(w.data(), x.data(), w.size());
    const double g = phi * rectifier_subgradient(sign, a);
    std::vector<double> out(x.size(), 0.0);
    if (g != 0.0) kernels::axpy(out.data(), g, x.data(), x.size());
    return out;
}

std::vector<double> output_regression_update(std::span<const double> w,
                                             std::span<const double> x, double phi, Sign sign) {
    if (w.size() != x.size()) throw ConfigError("output_regression_update: dimension mismatch");
    const double a = kernels::dot(w.data(), x.data(), w.size());
    std::vector<double> out(x.size(), 0.0);
    if (a > 0.0) kernels::axpy(out.data(), sign_factor(sign) * phi - a, x.data(), x.size());
    return out;
}

void project_l2_inplace(std::span<double> w, double radius) {
    if (!(radius > 0.0)) throw ConfigError("projection radius must be positive");
    const double sq = kernels::dot(w.data(), w.data(), w.size());
    if (sq > radius * radius) kernels::scale(w.data(), radius / std::sqrt(sq), w.size());
}

std::vector<double> project_l2(std::span<const double> w, double radius) {
    std::vector<double> out(w.begin(), w.end());
    project_l2_inplace(out, radius);
    return out;
}

namespace {

struct ExampleSlot {
    ActivationTrace trace;
    ErrorSignal err;
    FeedbackField feedback;
};

void compute_example(const Network& net, std::span<const double> x, double y,
                     const TrainConfig& cfg, std::span<const double> rescale, ExampleSlot& slot) {
    slot.trace = forward(net, x);
    slot.err = global_error(net, slot.trace, y);
    slot.feedback = cfg.algorithm == Algorithm::Backprop
                        ? backprop_deltas(net, slot.trace, slot.err)
                        : kickback_feedback(net, slot.trace, slot.err, rescale);
}

} // namespace

BatchStats train_batch(Network& net, const Dataset& ds, std::span<const std::size_t> indices,
                       const TrainConfig& cfg) {
    if (indices.empty()) throw ConfigError("empty batch");
    const std::size_t H = net.num_hidden_layers();
    cfg.validate(H);
    const std::vector<double> rescale = cfg.effective_rescale(H);
    const std::size_t L = net.num_layers();
    const std::size_t B = indices.size();

    std::vector<ExampleSlot> slots(B);
    const unsigned workers =
        std::min<unsigned>(cfg.threads > 0 ? cfg.threads : 1, static_cast<unsigned>(B));
    if (workers <= 1) {
        for (std::size_t e = 0; e < B; ++e)
            compute_example(net, ds.example(indices[e]), ds.targets[indices[e]], cfg, rescale,
                            slots[e]);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (unsigned w = 0; w < workers; ++w)
            pool.emplace_back([&, w] {
                for (std::size_t e = w; e < B; e += workers)
                    compute_example(net, ds.example(indices[e]), ds.targets[indices[e]], cfg,
                                    rescale, slots[e]);
            });
        for (auto& t : pool) t.join();
    }

    // accumulate in fixed example order
    std::vector<Matrix> hidden_grad(H);
    for (std::size_t h = 0; h < H; ++h)
        hidden_grad[h] = Matrix(net.weights[h].rows, net.weights[h].cols);
    std::vector<std::vector<double>> output_update(net.output_size(),
                                                   std::vector<double>(net.weights[L - 2].rows, 0.0));
    BatchStats stats;
    stats.examples = B;

    std::vector<double> gated;
    for (std::size_t e = 0; e < B; ++e) {
        const ExampleSlot& slot = slots[e];
        const double err = slot.err.beta;  // x_eff - y
        stats.batch_error += err * err;

        for (std::size_t h = 0; h < H; ++h) {
            const std::size_t l = h + 1;  // network layer of these nodes
            const std::vector<double>& phi = slot.feedback.values[h];
            const std::vector<double>& fire = slot.trace.firing[l - 1];
            const std::size_t n = net.layer_sizes[l];
            gated.resize(n);
            bool any = false;
            for (std::size_t j = 0; j < n; ++j) {
                gated[j] = phi[j] * fire[j];
                if (fire[j] != 0.0) {
                    ++stats.hidden_firing;
                    any = true;
                }
            }
            if (!any) continue;
            Matrix& g = hidden_grad[h];
            const std::vector<double>& x = slot.trace.activations[l - 1];
            for (std::size_t r = 0; r < g.rows; ++r)
                if (x[r] != 0.0) kernels::axpy(g.row(r), x[r], gated.data(), n);
        }

        // output rectilinear regression, target routed by sign
        const double y = ds.targets[indices[e]];
        const std::size_t node = slot.err.output_node;
        const double a = slot.trace.preactivations[L - 2][node];
        if (a > 0.0) {
            const double coeff = sign_factor(net.node_sign(L - 1, node)) * y - a;
            const std::vector<double>& x = slot.trace.activations[L - 2];
            kernels::axpy(output_update[node].data(), coeff, x.data(), output_update[node].size());
        }
    }
    stats.batch_error /= static_cast<double>(B);

    // mean update, applied once
    const double step = cfg.learning_rate / static_cast<double>(B);
    for (std::size_t h = 0; h < H; ++h) {
        for (double v : hidden_grad[h].data)
            if (!std::isfinite(v))
                throw NumericError("non-finite gradient at hidden layer " + std::to_string(h + 1));
        kernels::axpy(net.weights[h].data.data(), -step, hidden_grad[h].data.data(),
                      hidden_grad[h].data.size());
    }
    Matrix& w_out = net.weights[L - 2];
    for (std::size_t node = 0; node < net.output_size(); ++node) {
        const std::vector<double>& u = output_update[node];
        for (std::size_t r = 0; r < w_out.rows; ++r) {
            if (!std::isfinite(u[r]))
                throw NumericError("non-finite update at output node " + std::to_string(node));
            w_out(r, node) += step * u[r];
        }
    }

    if (cfg.projection_radius) {
        const double radius = *cfg.projection_radius;
        std::vector<double> column;
        for (std::size_t a = 0; a < net.weights.size(); ++a) {
            Matrix& w = net.weights[a];
            column.resize(w.rows);
            for (std::size_t c = 0; c < w.cols; ++c) {
                for (std::size_t r = 0; r < w.rows; ++r) column[r] = w(r, c);
                project_l2_inplace(column, radius);
                for (std::size_t r = 0; r < w.rows; ++r) w(r, c) = column[r];
            }
        }
    }
    if (cfg.enforce_coherence) net = enforce_signs(std::move(net));
    return stats;
}

Evaluation evaluate(const Network& net, const Dataset& ds) {
    if (ds.size() == 0) throw ConfigError("cannot evaluate on an empty dataset");
    const std::size_t pos = net.positive_output();
    const std::size_t neg = net.negative_output();
    Evaluation ev;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const ActivationTrace trace = forward(net, ds.example(i));
        const auto& out = trace.activations.back();
        const double y = ds.targets[i];
        const double correct = y < 0.0 ? out[neg] : out[pos];
        const double dc = correct - y;
        ev.correct_sign_mse += dc * dc;
        const double dp = out[pos] - std::max(0.0, y);
        const double dn = out[neg] - std::min(0.0, y);
        ev.routed_mse += dp * dp + dn * dn;
    }
    ev.correct_sign_mse /= static_cast<double>(ds.size());
    ev.routed_mse /= static_cast<double>(ds.size());
    return ev;
}

std::vector<MetricsRecord> train(Network& net, const Dataset& train_set, const Dataset& test_set,
                                 const TrainConfig& cfg, const EpochSink& sink) {
    if (train_set.size() == 0 || test_set.size() == 0)
        throw ConfigError("train and test sets must be non-empty");
    if (train_set.num_features() != net.input_size())
        throw ConfigError("dataset feature count does not match network input size");
    const std::size_t H = net.num_hidden_layers();
    cfg.validate(H);

    const std::size_t n_probe = std::min<std::size_t>(cfg.coherence_probe, test_set.size());
    std::vector<std::vector<double>> probes;
    probes.reserve(n_probe);
    for (std::size_t i = 0; i < n_probe; ++i) {
        auto x = test_set.example(i);
        probes.emplace_back(x.begin(), x.end());
    }

    std::vector<MetricsRecord> records;
    records.reserve(cfg.epochs);
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        for (const auto& batch : batches(train_set.size(), cfg.batch_size, cfg.seed, epoch))
            train_batch(net, train_set, batch, cfg);

        MetricsRecord rec;
        rec.epoch = epoch;
        const Evaluation on_train = evaluate(net, train_set);
        const Evaluation on_test = evaluate(net, test_set);
        rec.train_error = on_train.correct_sign_mse;
        rec.test_error = on_test.routed_mse;
        rec.nmse_train = train_set.target_variance > 0.0
                             ? rec.train_error / train_set.target_variance
                             : std::numeric_limits<double>::quiet_NaN();
        rec.nmse_test = test_set.target_variance > 0.0
                            ? rec.test_error / test_set.target_variance
                            : std::numeric_limits<double>::quiet_NaN();

        rec.coherence.assign(H, 0.0);
        if (!probes.empty() && H > 0) {
            for (const auto& x : probes) {
                const ActivationTrace trace = forward(net, x);
                for (std::size_t h = 0; h < H; ++h)
                    rec.coherence[h] += layer_coherence(net, trace, h + 1);
            }
            for (double& c : rec.coherence) c /= static_cast<double>(probes.size());
        }
        rec.wall_ms = static_cast<std::uint64_t>(std::chrono::duration_cast<std::chrono::milliseconds>(
                                                     std::chrono::steady_clock::now() - t0)
                                                     .count());
        bool finite = std::isfinite(rec.train_error) && std::isfinite(rec.test_error) &&
                      std::isfinite(rec.nmse_train) && std::isfinite(rec.nmse_test);
        for (double c : rec.coherence) finite = finite && std::isfinite(c);

        records.push_back(rec);
        if (sink) sink(records.back());
        if (!finite)
            throw NumericError("non-finite metrics at epoch " + std::to_string(epoch) +
                               " (train_error=" + std::to_string(rec.train_error) +
                               ", test_error=" + std::to_string(rec.test_error) + ")");
    }
    return records;
}

std::vector<double> calibrate_rescale(const Network& net, const Dataset& ds,
                                      std::size_t probe_count) {
    const std::size_t H = net.num_hidden_layers();
    const std::size_t n = std::min<std::size_t>(probe_count, ds.size());
    if (n == 0) throw ConfigError("calibration needs at least one probe example");
    const std::vector<double> unit(H, 1.0);

    std::vector<double> abs_delta(H, 0.0);
    std::vector<double> abs_eps(H, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const ActivationTrace trace = forward(net, ds.example(i));
        const ErrorSignal err = global_error(net, trace, ds.targets[i]);
        const FeedbackField deltas = backprop_deltas(net, trace, err);
        const FeedbackField eps = kickback_feedback(net, trace, err, unit);
        for (std::size_t h = 0; h < H; ++h) {
            abs_delta[h] += kernels::sum_abs(deltas.values[h].data(), deltas.values[h].size());
            abs_eps[h] += kernels::sum_abs(eps.values[h].data(), eps.values[h].size());
        }
    }
    std::vector<double> factors(H, 1.0);
    for (std::size_t h = 0; h < H; ++h)
        if (abs_eps[h] > 0.0 && abs_delta[h] > 0.0) factors[h] = abs_delta[h] / abs_eps[h];
    return factors;
}

GradCheckResult gradient_check(const Network& net, std::span<const double> input, double target,
                               const GradCheckConfig& cfg) {
    Network work = net;  // perturbed in place
    const std::size_t L = net.num_layers();
    const ActivationTrace base = forward(net, input);
    const ErrorSignal err = global_error(net, base, target);
    const FeedbackField deltas = backprop_deltas(net, base, err);

    const auto network_error = [&](const Network& n) {
        const ActivationTrace t = forward(n, input);
        const double d = t.activations.back()[err.output_node] - target;
        return 0.5 * d * d;
    };

    // suffix_min[l]: smallest |preactivation| over layers >= l
    std::vector<double> suffix_min(L + 1, std::numeric_limits<double>::infinity());
    for (std::size_t l = L - 1; l >= 1; --l) {
        suffix_min[l] = suffix_min[l + 1];
        for (double a : base.preactivations[l - 1])
            suffix_min[l] = std::min(suffix_min[l], std::fabs(a));
    }

    GradCheckResult result;
    bool corrupted = false;
    for (std::size_t h = 0; h < net.num_hidden_layers(); ++h) {
        const std::size_t l = h + 1;
        const Matrix& w = net.weights[h];
        for (std::size_t r = 0; r < w.rows; ++r)
            for (std::size_t c = 0; c < w.cols; ++c) {
                // a weight into node (l,c) can move that node's preactivation
                // and everything downstream; exclude kink-adjacent cases
                const double affected_min =
                    std::min(std::fabs(base.preactivations[l - 1][c]), suffix_min[l + 1]);
                if (affected_min < cfg.kink_margin * cfg.step) {
                    ++result.excluded;
                    continue;
                }
                double analytic =
                    deltas.values[h][c] * base.activations[l - 1][r] * base.firing[l - 1][c];
                if (cfg.corrupt && !corrupted && std::fabs(analytic) > cfg.denom_floor) {
                    analytic = -analytic;  // flip one meaningful gradient
                    corrupted = true;
                }
                const double keep = work.weights[h](r, c);
                work.weights[h](r, c) = keep + cfg.step;
                const double e_plus = network_error(work);
                work.weights[h](r, c) = keep - cfg.step;
                const double e_minus = network_error(work);
                work.weights[h](r, c) = keep;
                const double fd = (e_plus - e_minus) / (2.0 * cfg.step);

                const double denom =
                    std::max({std::fabs(analytic), std::fabs(fd), cfg.denom_floor});
                result.max_rel_err = std::max(result.max_rel_err, std::fabs(analytic - fd) / denom);
                ++result.checked;
            }
    }
    result.pass = result.max_rel_err < cfg.tolerance;
    return result;
}

} // namespace kickback
