#include "kickback/regret.hpp"

#include <cmath>
#include <limits>

#include "kickback/errors.hpp"
#include "kickback/kernels.hpp"
#include "kickback/training.hpp"

namespace kickback {

double regret_bound(double d_max, double e_cap, std::size_t f_count) {
    if (f_count == 0) throw ConfigError("regret bound undefined for an empty firing set");
    if (d_max < 0.0 || e_cap < 0.0) throw ConfigError("regret bound needs D, E >= 0");
    return std::sqrt(8.0 * d_max * e_cap / static_cast<double>(f_count));
}

RegretTrace run_online_node(const RegretExperiment& exp) {
    if (exp.inputs.empty()) throw ConfigError("regret experiment needs a non-empty sequence");
    const std::size_t dim = exp.inputs.front().size();
    for (const auto& x : exp.inputs)
        if (x.size() != dim) throw ConfigError("inconsistent input dimensions in sequence");
    if (exp.adversary == Adversary::None && exp.phis.size() != exp.inputs.size())
        throw ConfigError("feedback sequence length mismatch");
    if (!(exp.radius > 0.0)) throw ConfigError("radius must be positive");

    std::vector<double> w = exp.w_init;
    if (w.empty()) w.assign(dim, 0.0);
    if (w.size() != dim) throw ConfigError("w_init dimension mismatch");
    if (kernels::dot(w.data(), w.data(), dim) > exp.radius * exp.radius + 1e-12)
        throw ConfigError("w_init lies outside the constraint ball");

    const double s = sign_factor(exp.sign);
    const double e_cap =
        std::max(0.0, exp.radius * exp.radius - kernels::dot(w.data(), w.data(), dim));

    RegretTrace trace;
    trace.realized_phis.resize(exp.inputs.size(), 0.0);
    trace.E_cap = e_cap;

    double d_running = 0.0;
    for (std::size_t t = 0; t < exp.inputs.size(); ++t) {
        const std::vector<double>& x = exp.inputs[t];
        const double a = kernels::dot(w.data(), x.data(), dim);
        double phi;
        if (exp.adversary == Adversary::SignOfPreactivation)
            phi = a > 0.0 ? 1.0 : (a < 0.0 ? -1.0 : 0.0);
        else
            phi = exp.phis[t];
        trace.realized_phis[t] = phi;

        if (a <= 0.0) continue;  // not firing: zero loss, no update
        trace.firing_steps.push_back(t);
        trace.cumulative_loss += phi * s * a;  // phi * S_w(x) on the firing branch

        const double grad_sq = phi * phi * kernels::dot(x.data(), x.data(), dim);
        d_running = std::max(d_running, grad_sq);
        trace.D = d_running;
        if (grad_sq == 0.0) continue;  // zero gradient, projection is a no-op

        double eta;
        if (exp.schedule == StepSchedule::Constant) {
            eta = exp.schedule_param;
        } else {
            const double c =
                exp.schedule_param > 0.0 ? exp.schedule_param : std::sqrt(e_cap / d_running);
            eta = c / std::sqrt(static_cast<double>(trace.firing_steps.size()));
        }
        if (!(eta > 0.0)) continue;

        // w <- project(w - eta * phi * s * x)
        kernels::axpy(w.data(), -eta * phi * s, x.data(), dim);
        project_l2_inplace(w, exp.radius);
    }
    trace.final_w = w;

    const std::size_t f = trace.firing_steps.size();
    if (f == 0) {
        trace.bound = std::numeric_limits<double>::quiet_NaN();
        trace.regret_per_firing_linear = 0.0;
        return trace;
    }

    std::vector<std::vector<double>> fx;
    std::vector<double> fphi;
    fx.reserve(f);
    fphi.reserve(f);
    for (std::size_t t : trace.firing_steps) {
        fx.push_back(exp.inputs[t]);
        fphi.push_back(trace.realized_phis[t]);
    }

    const Comparator lin = best_in_hindsight_linear(fx, fphi, exp.sign, exp.radius);
    trace.comparator_linear_loss = lin.loss;
    trace.regret_per_firing_linear =
        (trace.cumulative_loss - lin.loss) / static_cast<double>(f);
    trace.bound = regret_bound(trace.D, trace.E_cap, f);

    if (exp.rectilinear_comparator) {
        const Comparator rect =
            best_in_hindsight_rectilinear(fx, fphi, exp.sign, exp.radius, exp.grid_resolution);
        trace.comparator_rect_loss = rect.loss;
        trace.regret_per_firing_rect =
            (trace.cumulative_loss - rect.loss) / static_cast<double>(f);
    }
    return trace;
}

Comparator best_in_hindsight_linear(std::span<const std::vector<double>> xs,
                                    std::span<const double> phis, Sign sign, double radius) {
    if (xs.empty() || xs.size() != phis.size())
        throw ConfigError("best_in_hindsight_linear needs a non-empty matched firing set");
    const std::size_t dim = xs.front().size();
    std::vector<double> g(dim, 0.0);
    const double s = sign_factor(sign);
    for (std::size_t t = 0; t < xs.size(); ++t)
        kernels::axpy(g.data(), s * phis[t], xs[t].data(), dim);

    Comparator best;
    best.w.assign(dim, 0.0);
    const double norm = std::sqrt(kernels::dot(g.data(), g.data(), dim));
    if (norm == 0.0) return best;  // constant objective; origin is fine
    for (std::size_t i = 0; i < dim; ++i) best.w[i] = -radius * g[i] / norm;
    best.loss = -radius * norm;
    return best;
}

Comparator best_in_hindsight_rectilinear(std::span<const std::vector<double>> xs,
                                         std::span<const double> phis, Sign sign, double radius,
                                         std::size_t grid_resolution) {
    if (xs.empty() || xs.size() != phis.size())
        throw ConfigError("best_in_hindsight_rectilinear needs a non-empty matched firing set");
    const std::size_t dim = xs.front().size();
    if (dim > 4) throw ConfigError("rectilinear comparator is brute force; dimension must be <= 4");
    if (grid_resolution < 10) throw ConfigError("grid_resolution must be >= 10");

    const double s = sign_factor(sign);
    const auto total_loss = [&](std::span<const double> w) {
        double loss = 0.0;
        for (std::size_t t = 0; t < xs.size(); ++t) {
            const double a = kernels::dot(w.data(), xs[t].data(), dim);
            if (a > 0.0) loss += phis[t] * s * a;
        }
        return loss;
    };

    Comparator best;
    best.w.assign(dim, 0.0);
    best.loss = 0.0;  // the origin never fires

    std::vector<double> w(dim, 0.0);
    std::vector<std::size_t> idx(dim, 0);
    const double step = 2.0 * radius / static_cast<double>(grid_resolution - 1);
    while (true) {
        double sq = 0.0;
        for (std::size_t i = 0; i < dim; ++i) {
            w[i] = -radius + step * static_cast<double>(idx[i]);
            sq += w[i] * w[i];
        }
        if (sq <= radius * radius) {
            const double loss = total_loss(w);
            if (loss < best.loss) {
                best.loss = loss;
                best.w = w;
            }
        }
        std::size_t i = 0;
        while (i < dim && ++idx[i] == grid_resolution) idx[i++] = 0;
        if (i == dim) break;
    }
    return best;
}

} // namespace kickback
