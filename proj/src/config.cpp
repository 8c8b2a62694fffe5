#include "kickback/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "kickback/errors.hpp"

namespace kickback {

namespace {

std::string trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return std::string(s);
}

} // namespace

KvFile KvFile::parse_text(const std::string& text, const std::string& origin) {
    KvFile kv;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped.front() == '#') continue;
        const std::size_t eq = stripped.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(line_no) +
                              ": expected 'key = value'");
        std::string key = trim(std::string_view(stripped).substr(0, eq));
        std::string value = trim(std::string_view(stripped).substr(eq + 1));
        if (key.empty())
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty key");
        kv.entries.emplace_back(std::move(key), std::move(value));
    }
    return kv;
}

KvFile KvFile::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_text(buf.str(), path);
}

std::string format_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& s, const std::string& key) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw ConfigError("key '" + key + "': bad real value '" + s + "'");
    return v;
}

std::uint64_t parse_u64(const std::string& s, const std::string& key) {
    std::uint64_t v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw ConfigError("key '" + key + "': bad integer value '" + s + "'");
    return v;
}

bool parse_bool(const std::string& s, const std::string& key) {
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw ConfigError("key '" + key + "': bad boolean value '" + s + "'");
}

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = s.find(sep, start);
        out.push_back(trim(std::string_view(s).substr(
            start, pos == std::string::npos ? std::string::npos : pos - start)));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return out;
}

} // namespace

std::vector<double> parse_double_list(const std::string& s, const std::string& key) {
    std::vector<double> out;
    for (const std::string& tok : split(s, ','))
        if (!tok.empty()) out.push_back(parse_double(tok, key));
    if (out.empty()) throw ConfigError("key '" + key + "': empty list");
    return out;
}

std::vector<std::size_t> parse_size_list(const std::string& s, const std::string& key) {
    std::vector<std::size_t> out;
    for (const std::string& tok : split(s, ','))
        if (!tok.empty()) out.push_back(static_cast<std::size_t>(parse_u64(tok, key)));
    if (out.empty()) throw ConfigError("key '" + key + "': empty list");
    return out;
}

std::string format_double_list(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += format_double(v[i]);
    }
    return out;
}

std::string format_size_list(const std::vector<std::size_t>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(v[i]);
    }
    return out;
}

template <class Struct>
void KvSpec<Struct>::set(Struct& s, const std::string& key, const std::string& value) const {
    for (const auto& f : fields_)
        if (f.key == key) {
            f.set(s, value);
            return;
        }
    throw ConfigError("unknown config key '" + key + "'");
}

template class KvSpec<TrainRunConfig>;
template class KvSpec<DatagenConfig>;
template class KvSpec<RegretRunConfig>;
template class KvSpec<GridSearchConfig>;

namespace {

void check_choice(const std::string& key, const std::string& value,
                  std::initializer_list<const char*> allowed) {
    for (const char* a : allowed)
        if (value == a) return;
    std::string msg = "key '" + key + "': value '" + value + "' not in {";
    bool first = true;
    for (const char* a : allowed) {
        if (!first) msg += ", ";
        msg += a;
        first = false;
    }
    throw ConfigError(msg + "}");
}

// terse field builders
#define KV_STR(name) field(#name, [](const auto& c) { return c.name; }, \
                           [](auto& c, const std::string& v) { c.name = v; })
#define KV_CHOICE(name, ...) field(#name, [](const auto& c) { return c.name; }, \
                                   [](auto& c, const std::string& v) { \
                                       check_choice(#name, v, {__VA_ARGS__}); \
                                       c.name = v; \
                                   })
#define KV_U64(name) field(#name, [](const auto& c) { return std::to_string(c.name); }, \
                           [](auto& c, const std::string& v) { c.name = parse_u64(v, #name); })
#define KV_DOUBLE(name) field(#name, [](const auto& c) { return format_double(c.name); }, \
                              [](auto& c, const std::string& v) { c.name = parse_double(v, #name); })
#define KV_BOOL(name) field(#name, [](const auto& c) { return c.name ? "true" : "false"; }, \
                            [](auto& c, const std::string& v) { c.name = parse_bool(v, #name); })
#define KV_SIZELIST(name) field(#name, [](const auto& c) { return format_size_list(c.name); }, \
                                [](auto& c, const std::string& v) { c.name = parse_size_list(v, #name); })

} // namespace

const KvSpec<TrainRunConfig>& TrainRunConfig::spec() {
    static const KvSpec<TrainRunConfig> spec = [] {
        KvSpec<TrainRunConfig> s;
        s.KV_CHOICE(data, "synthetic", "csv")
            .KV_STR(train_csv)
            .KV_STR(test_csv)
            .KV_U64(target_column)
            .KV_U64(feature_columns)
            .KV_BOOL(has_header)
            .KV_U64(synth_seed)
            .KV_U64(synth_features)
            .KV_SIZELIST(synth_hidden)
            .KV_U64(synth_train)
            .KV_U64(synth_test)
            .KV_DOUBLE(synth_noise)
            .KV_BOOL(normalize)
            .KV_BOOL(center_targets)
            .KV_SIZELIST(hidden_layers)
            .KV_CHOICE(sign_pattern, "alternate", "blocked")
            .KV_BOOL(bias)
            .KV_CHOICE(algorithm, "backprop", "kickback")
            .KV_DOUBLE(learning_rate)
            .KV_STR(rescale)
            .KV_CHOICE(init, "uniform", "signed")
            .KV_U64(batch_size)
            .KV_U64(epochs)
            .KV_U64(seed)
            .KV_DOUBLE(projection_radius)
            .KV_BOOL(enforce_signs)
            .KV_U64(threads)
            .KV_U64(coherence_probe)
            .KV_STR(output_dir);
        return s;
    }();
    return spec;
}

void TrainRunConfig::validate() const {
    if (data == "csv" && (train_csv.empty() || test_csv.empty()))
        throw ConfigError("csv data requires train_csv and test_csv");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
    if (hidden_layers.empty()) throw ConfigError("hidden_layers must be non-empty");
    if (rescale != "auto") parse_double_list(rescale, "rescale");
    if (projection_radius < 0.0) throw ConfigError("projection_radius must be >= 0");
    if (output_dir.empty()) throw ConfigError("output_dir must be set");
}

const KvSpec<DatagenConfig>& DatagenConfig::spec() {
    static const KvSpec<DatagenConfig> spec = [] {
        KvSpec<DatagenConfig> s;
        s.KV_U64(seed)
            .KV_U64(features)
            .KV_SIZELIST(hidden)
            .KV_U64(train)
            .KV_U64(test)
            .KV_DOUBLE(noise)
            .KV_BOOL(header)
            .KV_STR(output_dir);
        return s;
    }();
    return spec;
}

const KvSpec<RegretRunConfig>& RegretRunConfig::spec() {
    static const KvSpec<RegretRunConfig> spec = [] {
        KvSpec<RegretRunConfig> s;
        s.KV_U64(dim)
            .KV_U64(steps)
            .KV_U64(runs)
            .KV_DOUBLE(radius)
            .KV_CHOICE(schedule, "inverse_sqrt", "constant")
            .KV_DOUBLE(schedule_param)
            .KV_CHOICE(sign, "positive", "negative")
            .KV_CHOICE(adversary, "none", "sign")
            .KV_DOUBLE(input_std)
            .KV_DOUBLE(phi_std)
            .KV_DOUBLE(w_init_scale)
            .KV_BOOL(rect_comparator)
            .KV_U64(grid_resolution)
            .KV_U64(seed)
            .KV_STR(output_dir);
        return s;
    }();
    return spec;
}

void RegretRunConfig::validate() const {
    if (dim == 0 || steps == 0 || runs == 0) throw ConfigError("dim, steps and runs must be >= 1");
    if (!(radius > 0.0)) throw ConfigError("radius must be positive");
    if (w_init_scale < 0.0 || w_init_scale >= 1.0)
        throw ConfigError("w_init_scale must lie in [0, 1)");
    if (rect_comparator && dim > 4)
        throw ConfigError("rect_comparator requires dim <= 4 (brute-force grid)");
}

const KvSpec<GridSearchConfig>& GridSearchConfig::spec() {
    static const KvSpec<GridSearchConfig> spec = [] {
        KvSpec<GridSearchConfig> s;
        s.KV_CHOICE(data, "synthetic", "csv")
            .KV_STR(train_csv)
            .KV_U64(target_column)
            .KV_BOOL(has_header)
            .KV_U64(synth_seed)
            .KV_U64(synth_features)
            .KV_SIZELIST(synth_hidden)
            .KV_U64(synth_train)
            .KV_DOUBLE(synth_noise)
            .KV_BOOL(normalize)
            .KV_SIZELIST(hidden_layers)
            .KV_CHOICE(sign_pattern, "alternate", "blocked")
            .KV_BOOL(bias)
            .KV_CHOICE(algorithm, "backprop", "kickback")
            .KV_CHOICE(init, "uniform", "signed")
            .KV_U64(batch_size)
            .KV_U64(epochs)
            .KV_U64(seed)
            .KV_U64(threads)
            .KV_U64(folds)
            .KV_STR(grid_learning_rates)
            .KV_STR(grid_rescales)
            .KV_STR(output_dir);
        return s;
    }();
    return spec;
}

void GridSearchConfig::validate() const {
    if (data == "csv" && train_csv.empty()) throw ConfigError("csv data requires train_csv");
    if (folds < 2) throw ConfigError("folds must be >= 2");
    if (hidden_layers.empty()) throw ConfigError("hidden_layers must be non-empty");
    parse_double_list(grid_learning_rates, "grid_learning_rates");
}

} // namespace kickback
