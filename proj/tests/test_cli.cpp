#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "kickback/config.hpp"
#include "kickback/data.hpp"
#include "kickback/errors.hpp"

using namespace kickback;
namespace fs = std::filesystem;

#ifndef KICKBACK_CLI_PATH
#define KICKBACK_CLI_PATH "kickback"
#endif

namespace {

struct Cmd {
    int exit_code = -1;
    std::string output;
};

Cmd run_cli(const std::string& args) {
    const std::string out_path = "/tmp/kickback_cli_out.txt";
    const std::string cmd =
        std::string(KICKBACK_CLI_PATH) + " " + args + " > " + out_path + " 2>&1";
    const int status = std::system(cmd.c_str());
    Cmd result;
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream in(out_path);
    std::ostringstream buf;
    buf << in.rdbuf();
    result.output = buf.str();
    return result;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string strip_wall_ms(const std::string& metrics) {
    // drop the trailing wall-clock field of each data row
    std::istringstream in(metrics);
    std::string line, out;
    while (std::getline(in, line)) {
        if (!line.empty() && line[0] != '#') {
            const std::size_t cut = line.find_last_of(' ');
            line = line.substr(0, cut);
        }
        out += line + "\n";
    }
    return out;
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str(const std::string& sub = "") const { return (path / sub).string(); }
};

} // namespace

TEST_CASE("kv config: parsing, unknown keys, echo round trip") {
    const KvFile kv = KvFile::parse_text("# comment\nseed = 42\n\nepochs=3\n", "inline");
    REQUIRE(kv.entries.size() == 2);
    CHECK(kv.entries[0].first == "seed");
    CHECK(kv.entries[0].second == "42");

    TrainRunConfig cfg;
    TrainRunConfig::spec().apply(cfg, kv);
    CHECK(cfg.seed == 42);
    CHECK(cfg.epochs == 3);

    CHECK_THROWS_AS(TrainRunConfig::spec().set(cfg, "no_such_key", "1"), ConfigError);
    CHECK_THROWS_AS(TrainRunConfig::spec().set(cfg, "algorithm", "sgd"), ConfigError);
    CHECK_THROWS_AS(KvFile::parse_text("not a kv line\n", "inline"), ConfigError);

    cfg.learning_rate = 0.07;
    cfg.synth_noise = 1.0 / 3.0;  // not representable in decimal; must round-trip
    const std::string echoed = TrainRunConfig::spec().serialize(cfg);
    TrainRunConfig back;
    TrainRunConfig::spec().apply(back, KvFile::parse_text(echoed, "echo"));
    CHECK(back.learning_rate == cfg.learning_rate);
    CHECK(back.synth_noise == cfg.synth_noise);
    CHECK(back.hidden_layers == cfg.hidden_layers);
}

TEST_CASE("cli train: synthetic fixture writes epochs records and round-trips its echo") {
    const TempDir dir("kb_cli_train");
    const std::string common =
        " -O data=synthetic -O synth_features=5 -O synth_hidden=6 -O synth_train=60"
        " -O synth_test=20 -O hidden_layers=8 -O epochs=4 -O batch_size=10"
        " -O learning_rate=0.01 -O seed=5";
    const Cmd first = run_cli("train" + common + " -O output_dir=" + dir.str("a"));
    CHECK(first.exit_code == 0);

    const std::string metrics = read_file(dir.str("a/metrics.txt"));
    std::size_t rows = 0;
    std::istringstream in(metrics);
    std::string line;
    while (std::getline(in, line))
        if (!line.empty() && line[0] != '#') ++rows;
    CHECK(rows == 4);

    CHECK(fs::exists(dir.str("a/network.txt")));
    CHECK(fs::exists(dir.str("a/run_summary.json")));

    // the echoed config reproduces the run byte for byte (wall clock aside)
    const Cmd second = run_cli("train --config " + dir.str("a/config_resolved.txt") +
                               " -O output_dir=" + dir.str("b"));
    CHECK(second.exit_code == 0);
    CHECK(strip_wall_ms(read_file(dir.str("b/metrics.txt"))) ==
          strip_wall_ms(read_file(dir.str("a/metrics.txt"))));
    CHECK(read_file(dir.str("b/network.txt")) == read_file(dir.str("a/network.txt")));
}

TEST_CASE("cli train: one hidden layer, kickback rescale 1 equals backprop") {
    const TempDir dir("kb_cli_equiv");
    const std::string common =
        " -O data=synthetic -O synth_features=4 -O synth_hidden=5 -O synth_train=80"
        " -O synth_test=20 -O hidden_layers=7 -O epochs=5 -O batch_size=8"
        " -O learning_rate=0.02 -O seed=9 -O init=signed";
    const Cmd bp = run_cli("train" + common +
                           " -O algorithm=backprop -O output_dir=" + dir.str("bp"));
    const Cmd kb = run_cli("train" + common +
                           " -O algorithm=kickback -O rescale=1 -O output_dir=" + dir.str("kb"));
    CHECK(bp.exit_code == 0);
    CHECK(kb.exit_code == 0);
    CHECK(strip_wall_ms(read_file(dir.str("bp/metrics.txt"))) ==
          strip_wall_ms(read_file(dir.str("kb/metrics.txt"))));
    CHECK(read_file(dir.str("bp/network.txt")) == read_file(dir.str("kb/network.txt")));
}

TEST_CASE("cli train: missing data file names the path, exit 3") {
    const TempDir dir("kb_cli_missing");
    const Cmd res = run_cli(
        "train -O data=csv -O train_csv=/nonexistent/nope.csv -O test_csv=/nonexistent/nope.csv"
        " -O output_dir=" +
        dir.str("x"));
    CHECK(res.exit_code == 3);
    CHECK(res.output.find("/nonexistent/nope.csv") != std::string::npos);
}

TEST_CASE("cli train: unknown config key exits 1") {
    const Cmd res = run_cli("train -O hyperdrive=1");
    CHECK(res.exit_code == 1);
    CHECK(res.output.find("hyperdrive") != std::string::npos);
}

TEST_CASE("cli datagen: shapes as requested, loadable, deterministic") {
    const TempDir dir("kb_cli_datagen");
    const Cmd res = run_cli("datagen -O seed=3 -O features=5 -O hidden=6,4 -O train=50"
                            " -O test=20 -O output_dir=" +
                            dir.str("d"));
    CHECK(res.exit_code == 0);
    const Dataset train = load_csv(dir.str("d/train.csv"), 5, true);
    const Dataset test = load_csv(dir.str("d/test.csv"), 5, true);
    CHECK(train.size() == 50);
    CHECK(test.size() == 20);
    CHECK(train.num_features() == 5);

    const Cmd again = run_cli("datagen -O seed=3 -O features=5 -O hidden=6,4 -O train=50"
                              " -O test=20 -O output_dir=" +
                              dir.str("e"));
    CHECK(again.exit_code == 0);
    CHECK(read_file(dir.str("d/train.csv")) == read_file(dir.str("e/train.csv")));
}

TEST_CASE("cli regret: never-firing sequence reports F=0, exit 0") {
    const Cmd res = run_cli("regret -O steps=50 -O runs=1 -O w_init_scale=0 -O seed=2");
    CHECK(res.exit_code == 0);
    CHECK(res.output.find("firing=0") != std::string::npos);
    CHECK(res.output.find("bound=undefined") != std::string::npos);
}

TEST_CASE("cli gridsearch: 1-point grid, winner is that point; folds partition") {
    const TempDir dir("kb_cli_grid");
    const Cmd res = run_cli(
        "gridsearch -O data=synthetic -O synth_features=4 -O synth_hidden=5 -O synth_train=60"
        " -O hidden_layers=6 -O epochs=2 -O batch_size=10 -O folds=5 -O seed=4"
        " -O grid_learning_rates=0.005 -O output_dir=" +
        dir.str("g"));
    CHECK(res.exit_code == 0);
    CHECK(res.output.find("winner: learning_rate=0.005") != std::string::npos);
    const std::string table = read_file(dir.str("g/gridsearch.txt"));
    CHECK(table.find("1 0.005") != std::string::npos);
}

TEST_CASE("cli inspect and coherence-report run against a snapshot") {
    const TempDir dir("kb_cli_inspect");
    const Cmd train = run_cli(
        "train -O data=synthetic -O synth_features=4 -O synth_hidden=5 -O synth_train=40"
        " -O synth_test=30 -O hidden_layers=6,5 -O epochs=1 -O batch_size=10"
        " -O learning_rate=0.01 -O seed=8 -O output_dir=" +
        dir.str("t"));
    REQUIRE(train.exit_code == 0);

    const Cmd datagen =
        run_cli("datagen -O seed=8 -O features=4 -O hidden=5 -O train=30 -O test=10"
                " -O output_dir=" +
                dir.str("d"));
    REQUIRE(datagen.exit_code == 0);

    const Cmd inspect = run_cli("inspect --net " + dir.str("t/network.txt") +
                                " --input 0.5,-0.25,1,0.75 --target 0.4");
    CHECK(inspect.exit_code == 0);
    CHECK(inspect.output.find("beta=") != std::string::npos);
    CHECK(inspect.output.find("delta=") != std::string::npos);
    CHECK(inspect.output.find("epsilon=") != std::string::npos);
    CHECK(inspect.output.find("tau=") != std::string::npos);
    CHECK(inspect.output.find("pi=") != std::string::npos);

    const Cmd coh = run_cli("coherence-report --net " + dir.str("t/network.txt") + " --data " +
                            dir.str("d/train.csv") + " --target-column 4 --has-header");
    CHECK(coh.exit_code == 0);
    CHECK(coh.output.find("layer=1 coh=") != std::string::npos);
    CHECK(coh.output.find("fraction_coherent=") != std::string::npos);

    const Cmd cal = run_cli("calibrate-rescale --net " + dir.str("t/network.txt") + " --data " +
                            dir.str("d/train.csv") + " --target-column 4 --has-header");
    CHECK(cal.exit_code == 0);
    CHECK(cal.output.find("rescale = ") != std::string::npos);
}

TEST_CASE("cli gradcheck: corrupted gradients are detected") {
    const Cmd good = run_cli("gradcheck --inputs 3 --layers 5,6,6,2");
    CHECK(good.exit_code == 0);
    CHECK(good.output.find("PASS") != std::string::npos);
    const Cmd bad = run_cli("gradcheck --inputs 3 --layers 5,6,6,2 --corrupt");
    CHECK(bad.exit_code != 0);
    CHECK(bad.output.find("FAIL") != std::string::npos);
}
