#include "kickback/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>

#include "kickback/errors.hpp"
#include "kickback/rng.hpp"

namespace kickback {

void Dataset::recompute_stats() {
    const std::size_t n = size();
    const std::size_t d = num_features();
    feature_mean.assign(d, 0.0);
    feature_std.assign(d, 0.0);
    target_mean = 0.0;
    target_variance = 0.0;
    if (n == 0) return;

    for (std::size_t i = 0; i < n; ++i) {
        const double* row = inputs.row(i);
        for (std::size_t f = 0; f < d; ++f) feature_mean[f] += row[f];
        target_mean += targets[i];
    }
    const double inv = 1.0 / static_cast<double>(n);
    for (double& m : feature_mean) m *= inv;
    target_mean *= inv;

    for (std::size_t i = 0; i < n; ++i) {
        const double* row = inputs.row(i);
        for (std::size_t f = 0; f < d; ++f) {
            const double dlt = row[f] - feature_mean[f];
            feature_std[f] += dlt * dlt;
        }
        const double dt = targets[i] - target_mean;
        target_variance += dt * dt;
    }
    for (double& s : feature_std) s = std::sqrt(s * inv);
    target_variance *= inv;
}

namespace {

double parse_field(std::string_view tok, std::size_t line_no, const std::string& path) {
    // trim spaces and an optional trailing CR
    while (!tok.empty() && (tok.front() == ' ' || tok.front() == '\t')) tok.remove_prefix(1);
    while (!tok.empty() && (tok.back() == ' ' || tok.back() == '\t' || tok.back() == '\r'))
        tok.remove_suffix(1);
    double v = 0.0;
    auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size())
        throw IoError(path + ":" + std::to_string(line_no) + ": malformed numeric field '" +
                      std::string(tok) + "'");
    if (!std::isfinite(v))
        throw IoError(path + ":" + std::to_string(line_no) + ": non-finite value");
    return v;
}

} // namespace

Dataset load_csv(const std::string& path, std::size_t target_column, bool has_header,
                 std::optional<std::size_t> feature_columns) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open data file: " + path);

    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    std::size_t n_cols = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (has_header && line_no == 1) continue;
        if (line.empty() || line == "\r") continue;
        std::vector<double> row;
        std::size_t start = 0;
        while (true) {
            const std::size_t comma = line.find(',', start);
            const std::size_t end = comma == std::string::npos ? line.size() : comma;
            row.push_back(parse_field({line.data() + start, end - start}, line_no, path));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (n_cols == 0) {
            n_cols = row.size();
            if (target_column >= n_cols)
                throw IoError(path + ": target column " + std::to_string(target_column) +
                              " out of range (row has " + std::to_string(n_cols) + " columns)");
        } else if (row.size() != n_cols) {
            throw IoError(path + ":" + std::to_string(line_no) + ": expected " +
                          std::to_string(n_cols) + " columns, got " + std::to_string(row.size()));
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw IoError(path + ": no data rows");

    // which columns become features
    std::vector<std::size_t> feature_cols;
    for (std::size_t c = 0; c < n_cols; ++c) {
        if (c == target_column) continue;
        if (feature_columns && c >= *feature_columns) continue;
        feature_cols.push_back(c);
    }
    if (feature_cols.empty()) throw IoError(path + ": no feature columns left");

    Dataset ds;
    ds.name = path;
    ds.inputs = Matrix(rows.size(), feature_cols.size());
    ds.targets.resize(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        double* out = ds.inputs.row(i);
        for (std::size_t f = 0; f < feature_cols.size(); ++f) out[f] = rows[i][feature_cols[f]];
        ds.targets[i] = rows[i][target_column];
    }
    ds.recompute_stats();
    return ds;
}

namespace {

void write_double(std::ostream& out, double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    out.write(buf, res.ptr - buf);
}

} // namespace

void save_csv(const Dataset& ds, const std::string& path, std::size_t target_column,
              bool write_header) {
    const std::size_t n_cols = ds.num_features() + 1;
    if (target_column >= n_cols) throw ConfigError("target column out of range");
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    if (write_header) {
        std::size_t f = 0;
        for (std::size_t c = 0; c < n_cols; ++c) {
            if (c) out << ',';
            if (c == target_column) out << "target";
            else out << 'f' << f++;
        }
        out << '\n';
    }
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const double* row = ds.inputs.row(i);
        std::size_t f = 0;
        for (std::size_t c = 0; c < n_cols; ++c) {
            if (c) out << ',';
            write_double(out, c == target_column ? ds.targets[i] : row[f++]);
        }
        out << '\n';
    }
    if (!out) throw IoError("write failed: " + path);
}

namespace {

// inputs and noise come from separate streams so the drawn inputs do not
// depend on the noise setting
Dataset draw_dataset(const Network& teacher, std::size_t n, double noise_std, Rng& rng_x,
                     Rng& rng_noise, const std::string& name) {
    Dataset ds;
    ds.name = name;
    ds.inputs = Matrix(n, teacher.input_size());
    ds.targets.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double* row = ds.inputs.row(i);
        for (std::size_t f = 0; f < teacher.input_size(); ++f) row[f] = rng_x.gaussian();
        double y = predict(teacher, ds.example(i));
        if (noise_std > 0.0) y += noise_std * rng_noise.gaussian();
        ds.targets[i] = y;
    }
    ds.recompute_stats();
    return ds;
}

} // namespace

SyntheticResult synthetic_teacher(const SyntheticSpec& spec) {
    if (spec.n_train == 0 || spec.n_test == 0 || spec.n_features == 0)
        throw ConfigError("synthetic dataset sizes must be >= 1");
    if (spec.noise_std < 0.0) throw ConfigError("noise_std must be >= 0");

    constexpr std::size_t kMaxAttempts = 16;
    SyntheticResult result;
    for (std::size_t attempt = 0; attempt < kMaxAttempts; ++attempt) {
        const std::uint64_t seed = spec.seed + attempt;
        Network teacher = init_standard_network(spec.hidden_sizes, spec.n_features,
                                                InitScheme::Signed, derive_seed(seed, 101));
        Rng rng_x(derive_seed(seed, 102));
        Rng rng_noise(derive_seed(seed, 103));
        Dataset train = draw_dataset(teacher, spec.n_train, spec.noise_std, rng_x, rng_noise,
                                     "synthetic-train");
        // degenerate teacher: constant output over the sample
        if (train.target_variance <= 1e-12 * (1.0 + train.target_mean * train.target_mean))
            continue;
        Dataset test =
            draw_dataset(teacher, spec.n_test, spec.noise_std, rng_x, rng_noise, "synthetic-test");
        result.train = std::move(train);
        result.test = std::move(test);
        result.used_seed = seed;
        result.attempts = attempt + 1;
        return result;
    }
    throw NumericError("synthetic teacher degenerate for " + std::to_string(kMaxAttempts) +
                       " consecutive seeds");
}

NormalizedPair normalize(const Dataset& train, const Dataset& test, bool center_targets) {
    if (train.size() == 0) throw ConfigError("cannot normalize an empty train set");
    NormalizedPair out;
    out.stats.mean = train.feature_mean;
    out.stats.std_dev = train.feature_std;
    out.stats.target_shift = center_targets ? train.target_mean : 0.0;

    auto apply = [&](const Dataset& src, const char* suffix) {
        Dataset ds = src;
        ds.name = src.name + suffix;
        for (std::size_t i = 0; i < ds.size(); ++i) {
            double* row = ds.inputs.row(i);
            for (std::size_t f = 0; f < ds.num_features(); ++f) {
                const double sd = out.stats.std_dev[f];
                row[f] = sd > 0.0 ? (row[f] - out.stats.mean[f]) / sd : 0.0;
            }
            ds.targets[i] -= out.stats.target_shift;
        }
        ds.recompute_stats();
        return ds;
    };
    out.train = apply(train, "/normalized");
    out.test = apply(test, "/normalized");
    return out;
}

double nmse(std::span<const double> predictions, std::span<const double> targets,
            double target_variance) {
    if (predictions.size() != targets.size())
        throw ConfigError("prediction/target length mismatch");
    if (predictions.empty()) throw ConfigError("nmse needs at least one example");
    if (!(target_variance > 0.0)) throw NumericError("nmse requires positive target variance");
    double sum = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const double d = predictions[i] - targets[i];
        sum += d * d;
    }
    return sum / static_cast<double>(predictions.size()) / target_variance;
}

std::vector<std::vector<std::size_t>> batches(std::size_t n, std::size_t batch_size,
                                              std::uint64_t seed, std::size_t epoch) {
    if (batch_size == 0) throw ConfigError("batch size must be >= 1");
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    Rng rng(derive_seed(seed, 0xBA7C000000ULL + epoch));
    for (std::size_t i = n; i > 1; --i)
        std::swap(perm[i - 1], perm[rng.bounded(i)]);
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t start = 0; start < n; start += batch_size) {
        const std::size_t end = std::min(n, start + batch_size);
        out.emplace_back(perm.begin() + start, perm.begin() + end);
    }
    return out;
}

} // namespace kickback
