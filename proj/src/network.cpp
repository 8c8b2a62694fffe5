#include "kickback/network.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "kickback/errors.hpp"
#include "kickback/kernels.hpp"
#include "kickback/rng.hpp"

namespace kickback {

double rectifier_output(Sign sign, double a) {
    const double p = a > 0.0 ? a : 0.0;
    return sign == Sign::Positive ? p : -p;
}

int rectifier_subgradient(Sign sign, double a) {
    if (a <= 0.0) return 0;
    return sign == Sign::Positive ? 1 : -1;
}

bool Network::standard_output() const {
    if (output_size() != 2) return false;
    const auto& s = signs.back();
    return (s[0] == Sign::Positive) != (s[1] == Sign::Positive);
}

std::size_t Network::positive_output() const {
    if (!standard_output()) throw ConfigError("network output layer is not the standard +/- pair");
    return signs.back()[0] == Sign::Positive ? 0 : 1;
}

std::size_t Network::negative_output() const {
    if (!standard_output()) throw ConfigError("network output layer is not the standard +/- pair");
    return signs.back()[0] == Sign::Negative ? 0 : 1;
}

void Network::validate() const {
    if (layer_sizes.size() < 2) throw ConfigError("network needs at least input and output layers");
    for (std::size_t n : layer_sizes)
        if (n == 0) throw ConfigError("zero-size layer");
    if (signs.size() != layer_sizes.size() - 1) throw ConfigError("sign pattern length mismatch");
    for (std::size_t l = 1; l < layer_sizes.size(); ++l)
        if (signs[l - 1].size() != layer_sizes[l]) throw ConfigError("sign pattern size mismatch at layer " + std::to_string(l));
    if (weights.size() != layer_sizes.size() - 1) throw ConfigError("weight matrix count mismatch");
    for (std::size_t a = 0; a + 1 < layer_sizes.size(); ++a) {
        const Matrix& w = weights[a];
        if (w.rows != layer_sizes[a] + bias_extra() || w.cols != layer_sizes[a + 1])
            throw ConfigError("weight matrix shape mismatch at layer " + std::to_string(a));
        for (double v : w.data)
            if (!std::isfinite(v)) throw NumericError("non-finite weight in layer " + std::to_string(a));
    }
}

std::vector<std::vector<Sign>> alternating_signs(std::span<const std::size_t> layer_sizes) {
    std::vector<std::vector<Sign>> signs;
    for (std::size_t l = 1; l < layer_sizes.size(); ++l) {
        std::vector<Sign> layer(layer_sizes[l]);
        for (std::size_t j = 0; j < layer.size(); ++j)
            layer[j] = (j % 2 == 0) ? Sign::Positive : Sign::Negative;
        signs.push_back(std::move(layer));
    }
    return signs;
}

Network init_network(std::span<const std::size_t> layer_sizes,
                     std::vector<std::vector<Sign>> signs,
                     InitScheme scheme,
                     std::uint64_t seed,
                     bool bias_enabled) {
    Network net;
    net.layer_sizes.assign(layer_sizes.begin(), layer_sizes.end());
    net.signs = std::move(signs);
    net.bias_enabled = bias_enabled;

    if (net.layer_sizes.size() < 2) throw ConfigError("network needs at least input and output layers");
    for (std::size_t n : net.layer_sizes)
        if (n == 0) throw ConfigError("zero-size layer");

    Rng rng(derive_seed(seed, 0));
    for (std::size_t a = 0; a + 1 < net.layer_sizes.size(); ++a) {
        const std::size_t rows = net.layer_sizes[a] + net.bias_extra();
        const std::size_t cols = net.layer_sizes[a + 1];
        const double s = 1.0 / std::sqrt(static_cast<double>(rows));
        Matrix w(rows, cols);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c)
                w(r, c) = rng.symmetric(s);
        if (scheme == InitScheme::Signed) {
            for (std::size_t c = 0; c < cols; ++c) {
                const double f = sign_factor(net.signs[a][c]);
                for (std::size_t r = 0; r < rows; ++r)
                    w(r, c) = f * std::fabs(w(r, c));
            }
        }
        net.weights.push_back(std::move(w));
    }
    net.validate();
    return net;
}

Network init_standard_network(std::span<const std::size_t> hidden_sizes,
                              std::size_t input_size,
                              InitScheme scheme,
                              std::uint64_t seed,
                              bool bias_enabled) {
    std::vector<std::size_t> sizes;
    sizes.push_back(input_size);
    sizes.insert(sizes.end(), hidden_sizes.begin(), hidden_sizes.end());
    sizes.push_back(2);
    return init_network(sizes, alternating_signs(sizes), scheme, seed, bias_enabled);
}

ActivationTrace forward(const Network& net, std::span<const double> input) {
    if (input.size() != net.input_size())
        throw ConfigError("input dimension " + std::to_string(input.size()) +
                          " does not match network input size " + std::to_string(net.input_size()));
    for (double v : input)
        if (!std::isfinite(v)) throw NumericError("non-finite network input");

    const std::size_t L = net.num_layers();
    ActivationTrace trace;
    trace.activations.resize(L);
    trace.preactivations.resize(L - 1);
    trace.firing.resize(L - 1);

    const std::size_t pad = net.bias_extra();
    trace.activations[0].assign(input.begin(), input.end());
    if (pad) trace.activations[0].push_back(1.0);

    for (std::size_t l = 1; l < L; ++l) {
        const Matrix& w = net.weights[l - 1];
        const std::size_t n = net.layer_sizes[l];
        std::vector<double>& pre = trace.preactivations[l - 1];
        pre.assign(n, 0.0);
        const std::vector<double>& x = trace.activations[l - 1];
        for (std::size_t r = 0; r < w.rows; ++r)
            kernels::axpy(pre.data(), x[r], w.row(r), n);

        std::vector<double>& fire = trace.firing[l - 1];
        std::vector<double>& act = trace.activations[l];
        fire.resize(n);
        act.resize(n);
        for (std::size_t j = 0; j < n; ++j) {
            const Sign s = net.node_sign(l, j);
            fire[j] = static_cast<double>(rectifier_subgradient(s, pre[j]));
            act[j] = rectifier_output(s, pre[j]);
        }
        if (pad && l + 1 < L) act.push_back(1.0);
    }
    return trace;
}

double predict(const Network& net, const ActivationTrace& trace) {
    if (!net.standard_output()) throw ConfigError("predict requires the standard 2-node output layer");
    const auto& out = trace.activations.back();
    return out[0] + out[1];
}

double predict(const Network& net, std::span<const double> input) {
    return predict(net, forward(net, input));
}

namespace {

void write_double(std::ostream& out, double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    out.write(buf, res.ptr - buf);
}

std::string sign_string(const std::vector<Sign>& s) {
    std::string str;
    str.reserve(s.size());
    for (Sign v : s) str.push_back(v == Sign::Positive ? '+' : '-');
    return str;
}

std::vector<Sign> parse_sign_string(const std::string& str) {
    std::vector<Sign> s;
    s.reserve(str.size());
    for (char c : str) {
        if (c == '+') s.push_back(Sign::Positive);
        else if (c == '-') s.push_back(Sign::Negative);
        else throw IoError("bad sign character in network file");
    }
    return s;
}

} // namespace

void save_network(const Network& net, std::ostream& out) {
    out << "rectnet 1\n";
    out << "layers";
    for (std::size_t n : net.layer_sizes) out << ' ' << n;
    out << '\n';
    out << "bias " << (net.bias_enabled ? 1 : 0) << '\n';
    for (std::size_t l = 1; l < net.num_layers(); ++l)
        out << "signs " << l << ' ' << sign_string(net.signs[l - 1]) << '\n';
    for (std::size_t a = 0; a + 1 < net.num_layers(); ++a) {
        const Matrix& w = net.weights[a];
        out << "matrix " << a << ' ' << w.rows << ' ' << w.cols << '\n';
        for (std::size_t r = 0; r < w.rows; ++r) {
            for (std::size_t c = 0; c < w.cols; ++c) {
                if (c) out << ' ';
                write_double(out, w(r, c));
            }
            out << '\n';
        }
    }
}

void save_network(const Network& net, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    save_network(net, out);
    if (!out) throw IoError("write failed: " + path);
}

namespace {

double parse_double_token(const std::string& tok) {
    double v = 0.0;
    auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size())
        throw IoError("bad float token in network file: '" + tok + "'");
    return v;
}

} // namespace

Network load_network(std::istream& in) {
    std::string magic;
    int version = 0;
    if (!(in >> magic >> version) || magic != "rectnet" || version != 1)
        throw IoError("not a rectnet v1 file");

    Network net;
    std::string key;
    if (!(in >> key) || key != "layers") throw IoError("expected 'layers'");
    {
        std::string rest;
        std::getline(in, rest);
        std::istringstream ls(rest);
        std::size_t n;
        while (ls >> n) net.layer_sizes.push_back(n);
    }
    if (net.layer_sizes.size() < 2) throw IoError("bad layer list");

    int bias = 1;
    if (!(in >> key >> bias) || key != "bias") throw IoError("expected 'bias'");
    net.bias_enabled = bias != 0;

    net.signs.resize(net.layer_sizes.size() - 1);
    for (std::size_t l = 1; l < net.layer_sizes.size(); ++l) {
        std::size_t idx;
        std::string pattern;
        if (!(in >> key >> idx >> pattern) || key != "signs" || idx != l)
            throw IoError("expected signs line for layer " + std::to_string(l));
        net.signs[l - 1] = parse_sign_string(pattern);
    }

    for (std::size_t a = 0; a + 1 < net.layer_sizes.size(); ++a) {
        std::size_t idx, rows, cols;
        if (!(in >> key >> idx >> rows >> cols) || key != "matrix" || idx != a)
            throw IoError("expected matrix header for layer " + std::to_string(a));
        Matrix w(rows, cols);
        std::string tok;
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) {
                if (!(in >> tok)) throw IoError("truncated matrix data");
                w(r, c) = parse_double_token(tok);
            }
        net.weights.push_back(std::move(w));
    }
    net.validate();
    return net;
}

Network load_network_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open network file: " + path);
    return load_network(in);
}

} // namespace kickback
