// kickback: train/inspect rectifier regression networks with Backprop or
// Kickback feedback, run the built-in oracles, and drive the single-node
// online-regret harness.
//
// Exit codes: 0 success, 1 validation/config error, 2 numeric failure,
// 3 I/O error.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "kickback/coherence.hpp"
#include "kickback/config.hpp"
#include "kickback/data.hpp"
#include "kickback/errors.hpp"
#include "kickback/feedback.hpp"
#include "kickback/kernels.hpp"
#include "kickback/network.hpp"
#include "kickback/regret.hpp"
#include "kickback/rng.hpp"
#include "kickback/training.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace kb = kickback;

namespace {

// ---------- shared helpers ----------

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw kb::IoError("cannot create output directory " + dir + ": " + ec.message());
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw kb::IoError("cannot open " + path + " for writing");
    out << text;
    if (!out) throw kb::IoError("write failed: " + path);
}

template <class Config>
Config resolve_config(const std::string& config_path, const std::vector<std::string>& overrides) {
    Config cfg;
    if (!config_path.empty()) Config::spec().apply(cfg, kb::KvFile::parse_file(config_path));
    for (const std::string& kv : overrides) {
        const std::size_t eq = kv.find('=');
        if (eq == std::string::npos)
            throw kb::ConfigError("override '" + kv + "' is not KEY=VALUE");
        Config::spec().set(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    return cfg;
}

std::vector<std::vector<kb::Sign>> make_signs(std::span<const std::size_t> sizes,
                                              const std::string& pattern) {
    if (pattern == "alternate") return kb::alternating_signs(sizes);
    // blocked: first half positive, second half negative (odd size: extra positive)
    std::vector<std::vector<kb::Sign>> signs;
    for (std::size_t l = 1; l < sizes.size(); ++l) {
        std::vector<kb::Sign> layer(sizes[l], kb::Sign::Negative);
        for (std::size_t j = 0; j < (sizes[l] + 1) / 2; ++j) layer[j] = kb::Sign::Positive;
        signs.push_back(std::move(layer));
    }
    return signs;
}

kb::InitScheme parse_init(const std::string& s) {
    return s == "signed" ? kb::InitScheme::Signed : kb::InitScheme::Uniform;
}

std::string format_metrics_row(const kb::MetricsRecord& rec) {
    std::string row = std::to_string(rec.epoch);
    row += ' ';
    row += kb::format_double(rec.train_error);
    row += ' ';
    row += kb::format_double(rec.test_error);
    row += ' ';
    row += kb::format_double(rec.nmse_train);
    row += ' ';
    row += kb::format_double(rec.nmse_test);
    for (double c : rec.coherence) {
        row += ' ';
        row += kb::format_double(c);
    }
    row += ' ';
    row += std::to_string(rec.wall_ms);
    row += '\n';
    return row;
}

struct ResolvedData {
    kb::Dataset train;
    kb::Dataset test;
    std::uint64_t synth_used_seed = 0;
    std::size_t synth_attempts = 0;
};

ResolvedData resolve_train_data(const kb::TrainRunConfig& cfg) {
    ResolvedData out;
    if (cfg.data == "csv") {
        std::optional<std::size_t> feat;
        if (cfg.feature_columns > 0) feat = cfg.feature_columns;
        out.train = kb::load_csv(cfg.train_csv, cfg.target_column, cfg.has_header, feat);
        out.test = kb::load_csv(cfg.test_csv, cfg.target_column, cfg.has_header, feat);
        if (out.train.num_features() != out.test.num_features())
            throw kb::ConfigError("train/test feature count mismatch");
    } else {
        kb::SyntheticSpec spec;
        spec.seed = cfg.synth_seed;
        spec.n_features = cfg.synth_features;
        spec.hidden_sizes = cfg.synth_hidden;
        spec.n_train = cfg.synth_train;
        spec.n_test = cfg.synth_test;
        spec.noise_std = cfg.synth_noise;
        kb::SyntheticResult res = kb::synthetic_teacher(spec);
        out.train = std::move(res.train);
        out.test = std::move(res.test);
        out.synth_used_seed = res.used_seed;
        out.synth_attempts = res.attempts;
    }
    if (cfg.normalize) {
        kb::NormalizedPair norm = kb::normalize(out.train, out.test, cfg.center_targets);
        out.train = std::move(norm.train);
        out.test = std::move(norm.test);
    }
    return out;
}

// ---------- train ----------

int cmd_train(const std::string& config_path, const std::vector<std::string>& overrides) {
    kb::TrainRunConfig cfg = resolve_config<kb::TrainRunConfig>(config_path, overrides);
    cfg.validate();
    ensure_dir(cfg.output_dir);
    write_text_file(cfg.output_dir + "/config_resolved.txt",
                    kb::TrainRunConfig::spec().serialize(cfg));

    ResolvedData data = resolve_train_data(cfg);

    std::vector<std::size_t> sizes;
    sizes.push_back(data.train.num_features());
    sizes.insert(sizes.end(), cfg.hidden_layers.begin(), cfg.hidden_layers.end());
    sizes.push_back(2);
    kb::Network net = kb::init_network(sizes, make_signs(sizes, cfg.sign_pattern),
                                       parse_init(cfg.init), cfg.seed, cfg.bias);

    kb::TrainConfig tc;
    tc.algorithm = cfg.algorithm == "kickback" ? kb::Algorithm::Kickback : kb::Algorithm::Backprop;
    tc.learning_rate = cfg.learning_rate;
    tc.init_scheme = parse_init(cfg.init);
    tc.batch_size = cfg.batch_size;
    tc.epochs = cfg.epochs;
    tc.seed = cfg.seed;
    if (cfg.projection_radius > 0.0) tc.projection_radius = cfg.projection_radius;
    tc.bias_enabled = cfg.bias;
    tc.enforce_coherence = cfg.enforce_signs;
    tc.threads = static_cast<unsigned>(cfg.threads);
    tc.coherence_probe = cfg.coherence_probe;
    if (tc.algorithm == kb::Algorithm::Kickback) {
        tc.rescale = cfg.rescale == "auto"
                         ? kb::calibrate_rescale(net, data.train, 256)
                         : kb::parse_double_list(cfg.rescale, "rescale");
    }

    std::ofstream metrics(cfg.output_dir + "/metrics.txt");
    if (!metrics) throw kb::IoError("cannot open metrics file in " + cfg.output_dir);
    metrics << "# kickback metrics v1\n# epoch train_mse test_mse nmse_train nmse_test";
    for (std::size_t h = 1; h <= cfg.hidden_layers.size(); ++h) metrics << " coh_h" << h;
    metrics << " wall_ms\n";

    const auto records = kb::train(net, data.train, data.test, tc,
                                   [&](const kb::MetricsRecord& rec) {
                                       metrics << format_metrics_row(rec);
                                       metrics.flush();
                                   });

    kb::save_network(net, cfg.output_dir + "/network.txt");

    ordered_json summary;
    summary["command"] = "train";
    ordered_json config_echo;
    for (const auto& [k, v] :
         kb::KvFile::parse_text(kb::TrainRunConfig::spec().serialize(cfg), "echo").entries)
        config_echo[k] = v;
    summary["config"] = config_echo;
    summary["resolved"] = {{"layer_sizes", sizes},
                           {"rescale", tc.rescale},
                           {"kernels", kb::kernels::active().name}};
    summary["data"] = {{"train_examples", data.train.size()},
                       {"test_examples", data.test.size()},
                       {"train_target_variance", data.train.target_variance},
                       {"test_target_variance", data.test.target_variance}};
    if (cfg.data == "synthetic") {
        summary["data"]["synthetic_used_seed"] = data.synth_used_seed;
        summary["data"]["synthetic_attempts"] = data.synth_attempts;
    }
    if (!records.empty()) {
        const kb::MetricsRecord& last = records.back();
        summary["final"] = {{"epoch", last.epoch},
                            {"train_mse", last.train_error},
                            {"test_mse", last.test_error},
                            {"nmse_train", last.nmse_train},
                            {"nmse_test", last.nmse_test},
                            {"coherence", last.coherence}};
    }
    write_text_file(cfg.output_dir + "/run_summary.json", summary.dump(2) + "\n");

    if (!records.empty())
        std::cout << "train: " << records.size() << " epochs, final nmse_test="
                  << kb::format_double(records.back().nmse_test) << " -> " << cfg.output_dir
                  << "\n";
    else
        std::cout << "train: 0 epochs (nothing to do) -> " << cfg.output_dir << "\n";
    return 0;
}

// ---------- datagen ----------

int cmd_datagen(const std::string& config_path, const std::vector<std::string>& overrides) {
    kb::DatagenConfig cfg = resolve_config<kb::DatagenConfig>(config_path, overrides);
    ensure_dir(cfg.output_dir);
    write_text_file(cfg.output_dir + "/config_resolved.txt",
                    kb::DatagenConfig::spec().serialize(cfg));

    kb::SyntheticSpec spec;
    spec.seed = cfg.seed;
    spec.n_features = cfg.features;
    spec.hidden_sizes = cfg.hidden;
    spec.n_train = cfg.train;
    spec.n_test = cfg.test;
    spec.noise_std = cfg.noise;
    kb::SyntheticResult res = kb::synthetic_teacher(spec);

    const std::size_t target_col = res.train.num_features();  // target last
    kb::save_csv(res.train, cfg.output_dir + "/train.csv", target_col, cfg.header);
    kb::save_csv(res.test, cfg.output_dir + "/test.csv", target_col, cfg.header);

    std::cout << "datagen: " << res.train.size() << " train / " << res.test.size()
              << " test rows, " << res.train.num_features() << " features, teacher seed "
              << res.used_seed;
    if (res.attempts > 1) std::cout << " (after " << res.attempts << " attempts)";
    std::cout << " -> " << cfg.output_dir << "\n";
    return 0;
}

// ---------- regret ----------

int cmd_regret(const std::string& config_path, const std::vector<std::string>& overrides) {
    kb::RegretRunConfig cfg = resolve_config<kb::RegretRunConfig>(config_path, overrides);
    cfg.validate();

    std::ofstream file;
    if (!cfg.output_dir.empty()) {
        ensure_dir(cfg.output_dir);
        write_text_file(cfg.output_dir + "/config_resolved.txt",
                        kb::RegretRunConfig::spec().serialize(cfg));
        file.open(cfg.output_dir + "/regret.txt");
        if (!file) throw kb::IoError("cannot open regret output file");
    }

    for (std::uint64_t r = 0; r < cfg.runs; ++r) {
        kb::RegretExperiment exp;
        kb::Rng rng(kb::derive_seed(cfg.seed, 7000 + r));
        exp.inputs.resize(cfg.steps);
        exp.phis.resize(cfg.steps);
        for (std::uint64_t t = 0; t < cfg.steps; ++t) {
            exp.inputs[t].resize(cfg.dim);
            for (auto& v : exp.inputs[t]) v = cfg.input_std * rng.gaussian();
            exp.phis[t] = cfg.phi_std * rng.gaussian();
        }
        if (cfg.w_init_scale > 0.0) {
            exp.w_init.resize(cfg.dim);
            double sq = 0.0;
            for (auto& v : exp.w_init) {
                v = rng.gaussian();
                sq += v * v;
            }
            const double norm = std::sqrt(sq);
            if (norm > 0.0)
                for (auto& v : exp.w_init) v *= cfg.w_init_scale * cfg.radius / norm;
        }
        exp.adversary = cfg.adversary == "sign" ? kb::Adversary::SignOfPreactivation
                                                : kb::Adversary::None;
        exp.radius = cfg.radius;
        exp.schedule =
            cfg.schedule == "constant" ? kb::StepSchedule::Constant : kb::StepSchedule::InverseSqrt;
        exp.schedule_param = cfg.schedule_param;
        exp.sign = cfg.sign == "negative" ? kb::Sign::Negative : kb::Sign::Positive;
        exp.rectilinear_comparator = cfg.rect_comparator;
        exp.grid_resolution = cfg.grid_resolution;

        const kb::RegretTrace trace = kb::run_online_node(exp);

        std::string line = "run=" + std::to_string(r) + " dim=" + std::to_string(cfg.dim) +
                           " steps=" + std::to_string(cfg.steps) +
                           " firing=" + std::to_string(trace.firing_steps.size());
        if (trace.firing_steps.empty()) {
            line += " cum_loss=0 bound=undefined";
        } else {
            line += " cum_loss=" + kb::format_double(trace.cumulative_loss);
            line += " comparator_linear=" + kb::format_double(trace.comparator_linear_loss);
            line += " regret_linear=" + kb::format_double(trace.regret_per_firing_linear);
            line += " bound=" + kb::format_double(trace.bound);
            line += " D=" + kb::format_double(trace.D);
            line += " E_cap=" + kb::format_double(trace.E_cap);
            if (trace.comparator_rect_loss) {
                line += " comparator_rect=" + kb::format_double(*trace.comparator_rect_loss);
                line += " regret_rect=" + kb::format_double(*trace.regret_per_firing_rect);
            }
        }
        std::cout << line << "\n";
        if (file) file << line << "\n";
    }
    return 0;
}

// ---------- gradcheck ----------

int cmd_gradcheck(std::uint64_t seed, std::vector<std::size_t> layers, std::size_t nets,
                  std::size_t inputs, double step, double tol, bool bias,
                  const std::string& init, bool corrupt) {
    if (layers.size() < 2) throw kb::ConfigError("--layers needs at least input and output sizes");
    kb::GradCheckConfig gc;
    gc.step = step;
    gc.tolerance = tol;
    gc.corrupt = corrupt;

    double max_rel = 0.0;
    std::size_t checked = 0, excluded = 0;
    for (std::size_t n = 0; n < nets; ++n) {
        kb::Network net = kb::init_network(layers, kb::alternating_signs(layers),
                                           parse_init(init), kb::derive_seed(seed, n), bias);
        kb::Rng rng(kb::derive_seed(seed, 5000 + n));
        for (std::size_t i = 0; i < inputs; ++i) {
            std::vector<double> x(layers.front());
            for (auto& v : x) v = rng.gaussian();
            const double y = rng.gaussian();
            const kb::GradCheckResult res = kb::gradient_check(net, x, y, gc);
            max_rel = std::max(max_rel, res.max_rel_err);
            checked += res.checked;
            excluded += res.excluded;
        }
    }
    const bool pass = max_rel < tol;
    std::cout << "gradcheck: nets=" << nets << " inputs=" << inputs << " checked=" << checked
              << " excluded_kink=" << excluded << " max_rel_err=" << kb::format_double(max_rel)
              << " tol=" << kb::format_double(tol) << " -> " << (pass ? "PASS" : "FAIL") << "\n";
    return pass ? 0 : 2;
}

// ---------- oracles ----------

int cmd_oracles(std::uint64_t seed, std::size_t trials) {
    if (trials == 0) throw kb::ConfigError("--trials must be >= 1");
    const std::vector<std::size_t> sizes{8, 10, 10, 10, 2};
    bool all_pass = true;

    // factorization: delta_j == beta * pi_j
    {
        double worst = 0.0;
        kb::Rng rng(kb::derive_seed(seed, 1));
        for (std::size_t t = 0; t < trials; ++t) {
            kb::Network net =
                kb::init_network(sizes, kb::alternating_signs(sizes), kb::InitScheme::Uniform,
                                 kb::derive_seed(seed, 100 + t), true);
            std::vector<double> x(sizes.front());
            for (auto& v : x) v = rng.gaussian();
            const kb::ActivationTrace trace = kb::forward(net, x);
            const kb::ErrorSignal err = kb::global_error(net, trace, rng.gaussian());
            worst = std::max(worst, kb::factorization_residual(net, trace, err));
        }
        const bool ok = worst < 1e-10;
        all_pass = all_pass && ok;
        std::cout << "oracle factorization: trials=" << trials
                  << " max_residual=" << kb::format_double(worst) << " -> "
                  << (ok ? "PASS" : "FAIL") << "\n";
    }

    // signed nets: sign(eps_j) == sign(delta_j) wherever delta_j != 0
    {
        std::size_t checked = 0, agreed = 0;
        kb::Rng rng(kb::derive_seed(seed, 2));
        for (std::size_t t = 0; t < trials; ++t) {
            kb::Network net =
                kb::init_network(sizes, kb::alternating_signs(sizes), kb::InitScheme::Signed,
                                 kb::derive_seed(seed, 200 + t), true);
            std::vector<double> x(sizes.front());
            for (auto& v : x) v = rng.gaussian();
            const kb::ActivationTrace trace = kb::forward(net, x);
            const kb::ErrorSignal err = kb::global_error(net, trace, rng.gaussian());
            const kb::FeedbackField deltas = kb::backprop_deltas(net, trace, err);
            const std::vector<double> ones(net.num_hidden_layers(), 1.0);
            const kb::FeedbackField eps = kb::kickback_feedback(net, trace, err, ones);
            for (std::size_t h = 0; h < deltas.values.size(); ++h)
                for (std::size_t j = 0; j < deltas.values[h].size(); ++j)
                    if (deltas.values[h][j] != 0.0) {
                        ++checked;
                        if ((deltas.values[h][j] > 0.0) == (eps.values[h][j] > 0.0) &&
                            eps.values[h][j] != 0.0)
                            ++agreed;
                    }
        }
        const bool ok = checked == agreed;
        all_pass = all_pass && ok;
        std::cout << "oracle signed-sign-agreement: nodes_checked=" << checked
                  << " agreed=" << agreed << " -> " << (ok ? "PASS" : "FAIL") << "\n";
    }

    // coherent descent: one small Kickback step never increases the error
    {
        std::size_t done = 0, noop = 0, violations = 0, attempts = 0;
        kb::Rng rng(kb::derive_seed(seed, 3));
        while (done + noop < trials && attempts < trials * 64) {
            ++attempts;
            kb::Network net =
                kb::init_network(sizes, kb::alternating_signs(sizes), kb::InitScheme::Signed,
                                 kb::derive_seed(seed, 300 + attempts), true);
            kb::Dataset batch;
            batch.inputs = kb::Matrix(1, sizes.front());
            for (std::size_t f = 0; f < sizes.front(); ++f) batch.inputs(0, f) = rng.gaussian();
            batch.targets = {rng.gaussian()};
            batch.recompute_stats();

            const kb::ActivationTrace trace = kb::forward(net, batch.example(0));
            const kb::ErrorSignal err = kb::global_error(net, trace, batch.targets[0]);
            const kb::InfluenceField inf = kb::total_influence(net, trace, err.output_node);
            bool coherent = true;
            for (const auto& layer : inf.tau)
                for (double tau : layer) coherent = coherent && tau > 0.0;
            if (!coherent) continue;

            bool any_hidden_fires = false;
            for (std::size_t h = 1; h + 1 < sizes.size(); ++h)
                for (double f : trace.firing[h - 1]) any_hidden_fires |= f != 0.0;
            if (!any_hidden_fires) {
                ++noop;
                continue;
            }

            kb::TrainConfig tc;
            tc.algorithm = kb::Algorithm::Kickback;
            tc.learning_rate = 1e-4;
            const double before = kb::evaluate(net, batch).correct_sign_mse;
            const std::size_t idx[] = {0};
            kb::train_batch(net, batch, idx, tc);
            const double after = kb::evaluate(net, batch).correct_sign_mse;
            if (!(after <= before)) ++violations;
            ++done;
        }
        const bool ok = violations == 0 && done > 0;
        all_pass = all_pass && ok;
        std::cout << "oracle coherent-descent: steps=" << done << " noop_excluded=" << noop
                  << " violations=" << violations << " -> " << (ok ? "PASS" : "FAIL") << "\n";
    }

    // uniform nets: report measured agreement, no assertion
    {
        std::size_t checked = 0, agreed = 0;
        kb::Rng rng(kb::derive_seed(seed, 4));
        for (std::size_t t = 0; t < trials; ++t) {
            kb::Network net =
                kb::init_network(sizes, kb::alternating_signs(sizes), kb::InitScheme::Uniform,
                                 kb::derive_seed(seed, 400 + t), true);
            std::vector<double> x(sizes.front());
            for (auto& v : x) v = rng.gaussian();
            const kb::ActivationTrace trace = kb::forward(net, x);
            const kb::ErrorSignal err = kb::global_error(net, trace, rng.gaussian());
            const kb::FeedbackField deltas = kb::backprop_deltas(net, trace, err);
            const std::vector<double> ones(net.num_hidden_layers(), 1.0);
            const kb::FeedbackField eps = kb::kickback_feedback(net, trace, err, ones);
            for (std::size_t h = 0; h < deltas.values.size(); ++h)
                for (std::size_t j = 0; j < deltas.values[h].size(); ++j)
                    if (deltas.values[h][j] != 0.0) {
                        ++checked;
                        if (deltas.values[h][j] * eps.values[h][j] > 0.0) ++agreed;
                    }
        }
        std::cout << "oracle uniform-sign-agreement (report only): nodes_checked=" << checked
                  << " agreement_fraction="
                  << kb::format_double(checked ? static_cast<double>(agreed) /
                                                     static_cast<double>(checked)
                                               : 0.0)
                  << "\n";
    }

    std::cout << "oracles: " << (all_pass ? "PASS" : "FAIL") << "\n";
    return all_pass ? 0 : 2;
}

// ---------- inspect ----------

int cmd_inspect(const std::string& net_path, const std::string& input_csv, double target,
                const std::string& rescale_str) {
    const kb::Network net = kb::load_network_file(net_path);
    const std::vector<double> x = kb::parse_double_list(input_csv, "input");
    const kb::ActivationTrace trace = kb::forward(net, x);
    const kb::ErrorSignal err = kb::global_error(net, trace, target);
    const kb::FeedbackField deltas = kb::backprop_deltas(net, trace, err);
    std::vector<double> rescale;
    if (rescale_str.empty() || rescale_str == "auto")
        rescale.assign(net.num_hidden_layers(), 1.0);
    else
        rescale = kb::parse_double_list(rescale_str, "rescale");
    const kb::FeedbackField eps = kb::kickback_feedback(net, trace, err, rescale);
    const auto tau = kb::influence(net, trace);
    const kb::InfluenceField inf = kb::total_influence(net, trace, err.output_node);

    std::cout << "beta=" << kb::format_double(err.beta) << " output_node=" << err.output_node
              << " prediction=" << kb::format_double(kb::predict(net, trace)) << "\n";
    for (std::size_t h = 0; h < deltas.values.size(); ++h)
        for (std::size_t j = 0; j < deltas.values[h].size(); ++j)
            std::cout << "layer=" << h + 1 << " node=" << j
                      << " delta=" << kb::format_double(deltas.values[h][j])
                      << " epsilon=" << kb::format_double(eps.values[h][j])
                      << " tau=" << kb::format_double(tau[h][j])
                      << " pi=" << kb::format_double(inf.pi[h][j]) << "\n";
    return 0;
}

// ---------- coherence-report ----------

int cmd_coherence_report(const std::string& net_path, const std::string& data_path,
                         std::size_t target_column, bool has_header, std::size_t probes) {
    const kb::Network net = kb::load_network_file(net_path);
    const kb::Dataset ds = kb::load_csv(data_path, target_column, has_header);
    const std::size_t n = std::min<std::size_t>(probes, ds.size());
    std::vector<std::vector<double>> inputs;
    inputs.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto x = ds.example(i);
        inputs.emplace_back(x.begin(), x.end());
    }
    const kb::CoherenceReport report = kb::coherence_probe(net, inputs);
    for (std::size_t h = 0; h < report.per_layer.size(); ++h)
        std::cout << "layer=" << h + 1 << " coh=" << kb::format_double(report.per_layer[h])
                  << "\n";
    std::cout << "fraction_coherent=" << kb::format_double(report.fraction_coherent)
              << " n_probe=" << report.n_probe << "\n";
    return 0;
}

// ---------- calibrate-rescale ----------

int cmd_calibrate(const std::string& net_path, const std::string& data_path,
                  std::size_t target_column, bool has_header, std::size_t probes) {
    const kb::Network net = kb::load_network_file(net_path);
    const kb::Dataset ds = kb::load_csv(data_path, target_column, has_header);
    const std::vector<double> kappa = kb::calibrate_rescale(net, ds, probes);
    for (std::size_t h = 0; h < kappa.size(); ++h)
        std::cout << "layer=" << h + 1 << " kappa=" << kb::format_double(kappa[h]) << "\n";
    std::cout << "rescale = " << kb::format_double_list(kappa) << "\n";
    return 0;
}

// ---------- gridsearch ----------

struct GridCell {
    double learning_rate = 0.0;
    std::string rescale;  // "auto", "-" (backprop), or comma list
    double mean_val_nmse = 0.0;
};

int cmd_gridsearch(const std::string& config_path, const std::vector<std::string>& overrides) {
    kb::GridSearchConfig cfg = resolve_config<kb::GridSearchConfig>(config_path, overrides);
    cfg.validate();
    ensure_dir(cfg.output_dir);
    write_text_file(cfg.output_dir + "/config_resolved.txt",
                    kb::GridSearchConfig::spec().serialize(cfg));

    kb::Dataset full;
    if (cfg.data == "csv") {
        full = kb::load_csv(cfg.train_csv, cfg.target_column, cfg.has_header);
    } else {
        kb::SyntheticSpec spec;
        spec.seed = cfg.synth_seed;
        spec.n_features = cfg.synth_features;
        spec.hidden_sizes = cfg.synth_hidden;
        spec.n_train = cfg.synth_train;
        spec.n_test = 1;  // unused; CV slices the train set
        spec.noise_std = cfg.synth_noise;
        full = kb::synthetic_teacher(spec).train;
    }
    if (full.size() < cfg.folds) throw kb::ConfigError("fewer examples than folds");

    // seeded fold partition: each example lands in exactly one validation fold
    std::vector<std::size_t> perm(full.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    kb::Rng fold_rng(kb::derive_seed(cfg.seed, 9100));
    for (std::size_t i = perm.size(); i > 1; --i)
        std::swap(perm[i - 1], perm[fold_rng.bounded(i)]);

    const auto fold_range = [&](std::size_t f) {
        const std::size_t lo = f * full.size() / cfg.folds;
        const std::size_t hi = (f + 1) * full.size() / cfg.folds;
        return std::make_pair(lo, hi);
    };

    const auto subset = [&](std::size_t skip_fold, bool validation) {
        kb::Dataset ds;
        std::vector<std::size_t> rows;
        const auto [lo, hi] = fold_range(skip_fold);
        for (std::size_t p = 0; p < perm.size(); ++p) {
            const bool in_fold = p >= lo && p < hi;
            if (in_fold == validation) rows.push_back(perm[p]);
        }
        ds.inputs = kb::Matrix(rows.size(), full.num_features());
        ds.targets.resize(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const double* src = full.inputs.row(rows[i]);
            std::copy(src, src + full.num_features(), ds.inputs.row(i));
            ds.targets[i] = full.targets[rows[i]];
        }
        ds.name = full.name + (validation ? "/val" : "/fit");
        ds.recompute_stats();
        return ds;
    };

    std::vector<double> lrs = kb::parse_double_list(cfg.grid_learning_rates, "grid_learning_rates");
    std::vector<std::string> rescales;
    if (cfg.algorithm == "kickback") {
        if (cfg.grid_rescales == "auto") {
            rescales.push_back("auto");
        } else {
            std::string item;
            for (char c : cfg.grid_rescales + ";") {
                if (c == ';') {
                    if (!item.empty()) rescales.push_back(item);
                    item.clear();
                } else if (c != ' ') {
                    item.push_back(c);
                }
            }
            if (rescales.empty()) throw kb::ConfigError("grid_rescales is empty");
        }
    } else {
        rescales.push_back("-");
    }

    std::vector<GridCell> cells;
    for (double lr : lrs)
        for (const std::string& rs : rescales) cells.push_back({lr, rs, 0.0});

    for (GridCell& cell : cells) {
        double total = 0.0;
        for (std::size_t f = 0; f < cfg.folds; ++f) {
            kb::Dataset fit = subset(f, false);
            kb::Dataset val = subset(f, true);
            if (cfg.normalize) {
                kb::NormalizedPair norm = kb::normalize(fit, val, false);
                fit = std::move(norm.train);
                val = std::move(norm.test);
            }
            std::vector<std::size_t> sizes;
            sizes.push_back(fit.num_features());
            sizes.insert(sizes.end(), cfg.hidden_layers.begin(), cfg.hidden_layers.end());
            sizes.push_back(2);
            kb::Network net =
                kb::init_network(sizes, make_signs(sizes, cfg.sign_pattern), parse_init(cfg.init),
                                 kb::derive_seed(cfg.seed, 9200 + f), cfg.bias);
            kb::TrainConfig tc;
            tc.algorithm =
                cfg.algorithm == "kickback" ? kb::Algorithm::Kickback : kb::Algorithm::Backprop;
            tc.learning_rate = cell.learning_rate;
            tc.batch_size = cfg.batch_size;
            tc.epochs = cfg.epochs;
            tc.seed = kb::derive_seed(cfg.seed, 9300 + f);
            tc.bias_enabled = cfg.bias;
            tc.threads = static_cast<unsigned>(cfg.threads);
            tc.coherence_probe = 0;
            if (tc.algorithm == kb::Algorithm::Kickback) {
                if (cell.rescale == "auto")
                    tc.rescale = kb::calibrate_rescale(net, fit, 256);
                else
                    tc.rescale = kb::parse_double_list(cell.rescale, "grid_rescales");
            }
            kb::train(net, fit, val, tc);
            const kb::Evaluation ev = kb::evaluate(net, val);
            if (!(val.target_variance > 0.0))
                throw kb::NumericError("validation fold has zero target variance");
            total += ev.routed_mse / val.target_variance;
        }
        cell.mean_val_nmse = total / static_cast<double>(cfg.folds);
    }

    std::stable_sort(cells.begin(), cells.end(), [](const GridCell& a, const GridCell& b) {
        if (a.mean_val_nmse != b.mean_val_nmse) return a.mean_val_nmse < b.mean_val_nmse;
        return a.learning_rate < b.learning_rate;  // ties: prefer the smaller rate
    });

    std::string table = "# rank learning_rate rescale mean_val_nmse\n";
    for (std::size_t i = 0; i < cells.size(); ++i)
        table += std::to_string(i + 1) + " " + kb::format_double(cells[i].learning_rate) + " " +
                 cells[i].rescale + " " + kb::format_double(cells[i].mean_val_nmse) + "\n";
    write_text_file(cfg.output_dir + "/gridsearch.txt", table);
    std::cout << table;
    std::cout << "winner: learning_rate=" << kb::format_double(cells.front().learning_rate)
              << " rescale=" << cells.front().rescale
              << " mean_val_nmse=" << kb::format_double(cells.front().mean_val_nmse) << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"rectifier-network regression with Backprop and Kickback feedback"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> alias_overrides;  // applied after the config file
    std::vector<std::string> overrides;        // -O KEY=VALUE, applied last
    const auto add_config_opts = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "flat key = value config file");
        sub->add_option("-O,--opt", overrides, "override a config key, KEY=VALUE")
            ->take_all();
    };
    const auto add_alias = [&](CLI::App* sub, const std::string& flag, const std::string& key,
                               const std::string& help) {
        sub->add_option_function<std::string>(
            flag, [&alias_overrides, key](const std::string& v) {
                alias_overrides.push_back(key + "=" + v);
            },
            help);
    };

    auto* train = app.add_subcommand("train", "train a network and log per-epoch metrics");
    add_config_opts(train);
    add_alias(train, "--algorithm", "algorithm", "backprop | kickback");
    add_alias(train, "--lr", "learning_rate", "learning rate");
    add_alias(train, "--epochs", "epochs", "training epochs");
    add_alias(train, "--seed", "seed", "run seed");
    add_alias(train, "--output", "output_dir", "output directory");

    auto* datagen = app.add_subcommand("datagen", "write synthetic teacher CSV datasets");
    add_config_opts(datagen);
    add_alias(datagen, "--seed", "seed", "generator seed");
    add_alias(datagen, "--output", "output_dir", "output directory");

    auto* regret = app.add_subcommand("regret", "single-node online regret experiments");
    add_config_opts(regret);
    add_alias(regret, "--dim", "dim", "input dimension");
    add_alias(regret, "--steps", "steps", "sequence length");
    add_alias(regret, "--runs", "runs", "number of independent runs");
    add_alias(regret, "--radius", "radius", "l2 constraint radius");
    add_alias(regret, "--schedule", "schedule", "inverse_sqrt | constant");
    add_alias(regret, "--sign", "sign", "positive | negative");
    add_alias(regret, "--adversary", "adversary", "none | sign");
    add_alias(regret, "--seed", "seed", "run seed");

    auto* grid = app.add_subcommand("gridsearch", "k-fold cross-validated parameter grid");
    add_config_opts(grid);
    add_alias(grid, "--folds", "folds", "cross-validation folds");
    add_alias(grid, "--seed", "seed", "run seed");

    auto* gradcheck =
        app.add_subcommand("gradcheck", "Backprop gradients vs central finite differences");
    std::uint64_t gc_seed = 1;
    std::vector<std::size_t> gc_layers{8, 10, 10, 10, 2};
    std::size_t gc_nets = 1, gc_inputs = 20;
    double gc_step = 1e-6, gc_tol = 1e-5;
    bool gc_no_bias = false, gc_corrupt = false;
    std::string gc_init = "uniform";
    gradcheck->add_option("--seed", gc_seed);
    gradcheck->add_option("--layers", gc_layers, "full layer sizes, input..output")->delimiter(',');
    gradcheck->add_option("--nets", gc_nets);
    gradcheck->add_option("--inputs", gc_inputs);
    gradcheck->add_option("--step", gc_step);
    gradcheck->add_option("--tol", gc_tol);
    gradcheck->add_option("--init", gc_init)->check(CLI::IsMember({"uniform", "signed"}));
    gradcheck->add_flag("--no-bias", gc_no_bias);
    gradcheck->add_flag("--corrupt", gc_corrupt,
                        "test hook: flip one analytic gradient sign; must FAIL");

    auto* oracles = app.add_subcommand("oracles", "factorization / sign-agreement / descent checks");
    std::uint64_t or_seed = 1;
    std::size_t or_trials = 100;
    oracles->add_option("--seed", or_seed);
    oracles->add_option("--trials", or_trials);

    auto* inspect = app.add_subcommand("inspect", "dump delta/epsilon/tau/pi for one input");
    std::string in_net, in_input, in_rescale;
    double in_target = 0.0;
    inspect->add_option("--net", in_net)->required();
    inspect->add_option("--input", in_input, "comma-separated input vector")->required();
    inspect->add_option("--target", in_target)->required();
    inspect->add_option("--rescale", in_rescale);

    auto* coh = app.add_subcommand("coherence-report", "probe-set coherence of a network snapshot");
    std::string coh_net, coh_data;
    std::size_t coh_target_col = 0, coh_probes = 256;
    bool coh_header = false;
    coh->add_option("--net", coh_net)->required();
    coh->add_option("--data", coh_data)->required();
    coh->add_option("--target-column", coh_target_col);
    coh->add_flag("--has-header", coh_header);
    coh->add_option("--probes", coh_probes);

    auto* cal = app.add_subcommand("calibrate-rescale",
                                   "propose Kickback rescale factors from |delta|/|eps| ratios");
    std::string cal_net, cal_data;
    std::size_t cal_target_col = 0, cal_probes = 256;
    bool cal_header = false;
    cal->add_option("--net", cal_net)->required();
    cal->add_option("--data", cal_data)->required();
    cal->add_option("--target-column", cal_target_col);
    cal->add_flag("--has-header", cal_header);
    cal->add_option("--probes", cal_probes);

    CLI11_PARSE(app, argc, argv);

    std::vector<std::string> merged = alias_overrides;
    merged.insert(merged.end(), overrides.begin(), overrides.end());

    try {
        if (train->parsed()) return cmd_train(config_path, merged);
        if (datagen->parsed()) return cmd_datagen(config_path, merged);
        if (regret->parsed()) return cmd_regret(config_path, merged);
        if (grid->parsed()) return cmd_gridsearch(config_path, merged);
        if (gradcheck->parsed())
            return cmd_gradcheck(gc_seed, gc_layers, gc_nets, gc_inputs, gc_step, gc_tol,
                                 !gc_no_bias, gc_init, gc_corrupt);
        if (oracles->parsed()) return cmd_oracles(or_seed, or_trials);
        if (inspect->parsed()) return cmd_inspect(in_net, in_input, in_target, in_rescale);
        if (coh->parsed())
            return cmd_coherence_report(coh_net, coh_data, coh_target_col, coh_header, coh_probes);
        if (cal->parsed())
            return cmd_calibrate(cal_net, cal_data, cal_target_col, cal_header, cal_probes);
    } catch (const kb::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const kb::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 2;
    } catch (const kb::IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
