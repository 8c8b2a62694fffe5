#pragma once

// Regression datasets: CSV ingestion (SARCOS/Barrett-style numeric layouts),
// a synthetic teacher-network generator for desk-scale experiments, train-
// statistics normalization, nMSE, and seeded epoch batching.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kickback/network.hpp"

namespace kickback {

struct Dataset {
    Matrix inputs;                 // n_examples x n_features, row per example
    std::vector<double> targets;   // length n_examples
    std::vector<double> feature_mean;
    std::vector<double> feature_std;
    double target_mean = 0.0;
    double target_variance = 0.0;  // population variance
    std::string name;

    std::size_t size() const { return targets.size(); }
    std::size_t num_features() const { return inputs.cols; }
    std::span<const double> example(std::size_t i) const { return {inputs.row(i), inputs.cols}; }

    void recompute_stats();
};

/// Parses comma-separated numeric rows; `target_column` (0-based) becomes the
/// target, the remaining columns become features in file order. When
/// `feature_columns` is set only the first that many columns are features and
/// every other non-target column is dropped (SARCOS layouts keep 21 feature
/// columns and 7 torque columns; selecting torque k as the target must not
/// leak the other six torques into the inputs).
Dataset load_csv(const std::string& path, std::size_t target_column, bool has_header,
                 std::optional<std::size_t> feature_columns = {});

/// Inverse of load_csv for the same layout, exact round trip: features in
/// order with the target re-inserted at `target_column`.
void save_csv(const Dataset& ds, const std::string& path, std::size_t target_column,
              bool write_header);

struct SyntheticSpec {
    std::uint64_t seed = 1;
    std::size_t n_features = 8;
    std::vector<std::size_t> hidden_sizes{8, 8};
    std::size_t n_train = 1000;
    std::size_t n_test = 200;
    double noise_std = 0.0;
};

struct SyntheticResult {
    Dataset train;
    Dataset test;
    std::uint64_t used_seed = 0;  // may exceed spec.seed if a degenerate teacher was redrawn
    std::size_t attempts = 1;
};

/// Inputs ~ N(0,1); targets are a fixed signed-initialized teacher network's
/// predictions plus Gaussian noise. A teacher whose outputs are constant over
/// the sample is redrawn with the next seed.
SyntheticResult synthetic_teacher(const SyntheticSpec& spec);

struct NormalizationStats {
    std::vector<double> mean;
    std::vector<double> std_dev;  // zero-variance features carry std 0 and map to 0
    double target_shift = 0.0;
};

struct NormalizedPair {
    Dataset train;
    Dataset test;
    NormalizationStats stats;
};

/// Standardizes features to zero mean / unit variance using train statistics
/// only; the same affine map is applied to test. Targets are left alone
/// unless `center_targets`.
NormalizedPair normalize(const Dataset& train, const Dataset& test, bool center_targets = false);

/// Mean squared error divided by the target variance.
double nmse(std::span<const double> predictions, std::span<const double> targets,
            double target_variance);

/// Seeded per-epoch permutation of [0, n) split into consecutive chunks;
/// the final partial chunk is kept.
std::vector<std::vector<std::size_t>> batches(std::size_t n, std::size_t batch_size,
                                              std::uint64_t seed, std::size_t epoch);

} // namespace kickback
