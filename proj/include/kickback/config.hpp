#pragma once

// Flat key = value run configuration. Unknown keys are rejected; every value
// round-trips exactly (doubles are written in shortest-round-trip form), so
// the resolved-config echo written next to a run's outputs reproduces it.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace kickback {

struct KvFile {
    std::vector<std::pair<std::string, std::string>> entries;

    static KvFile parse_file(const std::string& path);
    static KvFile parse_text(const std::string& text, const std::string& origin);
};

// serialization helpers
std::string format_double(double v);
double parse_double(const std::string& s, const std::string& key);
std::uint64_t parse_u64(const std::string& s, const std::string& key);
bool parse_bool(const std::string& s, const std::string& key);
std::vector<double> parse_double_list(const std::string& s, const std::string& key);
std::vector<std::size_t> parse_size_list(const std::string& s, const std::string& key);
std::string format_double_list(const std::vector<double>& v);
std::string format_size_list(const std::vector<std::size_t>& v);

template <class Struct>
class KvSpec {
public:
    using Getter = std::function<std::string(const Struct&)>;
    using Setter = std::function<void(Struct&, const std::string&)>;

    KvSpec& field(std::string key, Getter get, Setter set) {
        fields_.push_back({std::move(key), std::move(get), std::move(set)});
        return *this;
    }

    /// Applies one key; throws ConfigError for unknown keys or bad values.
    void set(Struct& s, const std::string& key, const std::string& value) const;

    void apply(Struct& s, const KvFile& kv) const {
        for (const auto& [key, value] : kv.entries) set(s, key, value);
    }

    /// All fields, defaults expanded, in declaration order.
    std::string serialize(const Struct& s) const {
        std::string out;
        for (const auto& f : fields_) {
            out += f.key;
            out += " = ";
            out += f.get(s);
            out += '\n';
        }
        return out;
    }

private:
    struct Field {
        std::string key;
        Getter get;
        Setter set;
    };
    std::vector<Field> fields_;
};

// --- run configurations ---

struct TrainRunConfig {
    // data
    std::string data = "synthetic";  // synthetic | csv
    std::string train_csv;
    std::string test_csv;
    std::uint64_t target_column = 0;
    std::uint64_t feature_columns = 0;  // 0: every non-target column
    bool has_header = false;
    std::uint64_t synth_seed = 1;
    std::uint64_t synth_features = 8;
    std::vector<std::size_t> synth_hidden{8, 8};
    std::uint64_t synth_train = 1000;
    std::uint64_t synth_test = 200;
    double synth_noise = 0.0;
    bool normalize = true;
    bool center_targets = false;
    // architecture
    std::vector<std::size_t> hidden_layers{10, 100, 200};
    std::string sign_pattern = "alternate";  // alternate | blocked
    bool bias = true;
    // optimization
    std::string algorithm = "backprop";  // backprop | kickback
    double learning_rate = 1e-3;
    std::string rescale = "auto";  // comma list of per-hidden-layer factors, or auto
    std::string init = "uniform";  // uniform | signed
    std::uint64_t batch_size = 20;
    std::uint64_t epochs = 10;
    std::uint64_t seed = 1;
    double projection_radius = 0.0;  // 0 disables
    bool enforce_signs = false;      // ablation: re-impose sign constraints per batch
    std::uint64_t threads = 1;
    std::uint64_t coherence_probe = 256;
    std::string output_dir = "train-out";

    static const KvSpec<TrainRunConfig>& spec();
    void validate() const;
};

struct DatagenConfig {
    std::uint64_t seed = 1;
    std::uint64_t features = 8;
    std::vector<std::size_t> hidden{8, 8};
    std::uint64_t train = 1000;
    std::uint64_t test = 200;
    double noise = 0.0;
    bool header = true;
    std::string output_dir = "data-out";

    static const KvSpec<DatagenConfig>& spec();
};

struct RegretRunConfig {
    std::uint64_t dim = 2;
    std::uint64_t steps = 1000;
    std::uint64_t runs = 1;
    double radius = 1.0;
    std::string schedule = "inverse_sqrt";  // inverse_sqrt | constant
    double schedule_param = 0.0;            // 0 selects the adaptive inverse-sqrt constant
    std::string sign = "positive";
    std::string adversary = "none";  // none | sign
    double input_std = 1.0;
    double phi_std = 1.0;
    double w_init_scale = 0.1;  // ||w_1|| as a fraction of the radius
    bool rect_comparator = false;
    std::uint64_t grid_resolution = 41;
    std::uint64_t seed = 1;
    std::string output_dir;  // empty: stdout only

    static const KvSpec<RegretRunConfig>& spec();
    void validate() const;
};

struct GridSearchConfig {
    // data + architecture, as in TrainRunConfig
    std::string data = "synthetic";
    std::string train_csv;
    std::uint64_t target_column = 0;
    bool has_header = false;
    std::uint64_t synth_seed = 1;
    std::uint64_t synth_features = 8;
    std::vector<std::size_t> synth_hidden{8, 8};
    std::uint64_t synth_train = 1000;
    double synth_noise = 0.0;
    bool normalize = true;
    std::vector<std::size_t> hidden_layers{10, 100, 200};
    std::string sign_pattern = "alternate";
    bool bias = true;
    std::string algorithm = "backprop";
    std::string init = "uniform";
    std::uint64_t batch_size = 20;
    std::uint64_t epochs = 5;
    std::uint64_t seed = 1;
    std::uint64_t threads = 1;
    std::uint64_t folds = 5;
    std::string grid_learning_rates = "0.0003,0.001,0.003,0.01";
    // semicolon-separated per-hidden-layer vectors, or auto
    std::string grid_rescales = "auto";
    std::string output_dir = "gridsearch-out";

    static const KvSpec<GridSearchConfig>& spec();
    void validate() const;
};

} // namespace kickback
