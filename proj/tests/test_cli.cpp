#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "lrad/cli.hpp"
#include "test_util.hpp"

using namespace lrad;
using lrad::test::TempDir;

namespace {

cli::RunConfig parse(std::vector<std::string> args) {
    args.insert(args.begin(), "lrad");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    return cli::parse_and_validate(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_tiny_config(const std::filesystem::path& p) {
    std::ofstream(p) << R"({
      "data": {"kind": "synth", "synth": {"normal_count": 40, "anomaly_count": 10, "radius_min": 3,
                                          "radius_max": 6, "patch_size": 6}},
      "held_class": 1,
      "network": {"image_size": 16, "stages": 3, "latent_dim": 8, "base_width": 4},
      "train": {"epochs": 2, "batch_size": 8, "rank": 2}
    })";
}

}  // namespace

TEST(Cli, FlagsOverrideConfigFileOverDefaults) {
    TempDir dir("cli-parse");
    write_tiny_config(dir / "c.json");
    const auto c = parse({"train", "--config", (dir / "c.json").string(), "--epochs", "5", "--weights", "1,2,3,0.5",
                          "--out", (dir / "run").string(), "--polarity", "class-is-normal", "--held-class", "0"});
    EXPECT_EQ(c.train.epochs, 5u);        // flag
    EXPECT_EQ(c.train.batch_size, 8u);    // config
    EXPECT_EQ(c.train.adam.beta1, 0.5);   // default
    EXPECT_EQ(c.train.weights.adv, 2.0);
    EXPECT_EQ(c.train.weights.rank, 0.5);
    EXPECT_EQ(c.polarity, Polarity::class_is_normal);
    EXPECT_EQ(c.network.latent_dim, 8u);
    ASSERT_TRUE(std::filesystem::exists(dir / "run" / "resolved_config.json"));
    const auto resolved = json::parse(slurp(dir / "run" / "resolved_config.json"));
    EXPECT_EQ(resolved.at("train").at("epochs").get<int>(), 5);
    EXPECT_EQ(resolved.at("polarity").get<std::string>(), "class-is-normal");
}

TEST(Cli, ValidationFailuresAreConfigErrors) {
    TempDir dir("cli-bad");
    write_tiny_config(dir / "c.json");
    const auto cfg = (dir / "c.json").string(), out = (dir / "o").string();
    EXPECT_THROW(parse({"train", "--config", cfg, "--out", out, "--held-class", "2"}), ConfigError);
    EXPECT_THROW(parse({"train", "--data", "mnist", "--images", "/no/such", "--labels", "/no/such", "--out", out}),
                 ConfigError);
    EXPECT_THROW(parse({"train", "--data", "cifar10", "--held-class", "10", "--dir", dir.path().string(), "--out", out}),
                 ConfigError);
    EXPECT_THROW(parse({"train", "--config", cfg, "--out", out, "--rank", "8"}), ConfigError);
    EXPECT_THROW(parse({"train", "--config", cfg, "--out", out, "--weights", "1,2"}), ConfigError);
    EXPECT_THROW(parse({"fly", "--out", out}), ConfigError);
    EXPECT_THROW(parse({"score", "--config", cfg, "--out", out}), ConfigError);
    EXPECT_THROW(parse({"train", "--config", cfg, "--out", out, "--bogus"}), ConfigError);
    std::ofstream(dir / "unknown.json") << R"({"train": {"epoch": 3}})";
    EXPECT_THROW(parse({"train", "--config", (dir / "unknown.json").string(), "--out", out}), ConfigError);
}

TEST(Cli, MainMapsErrorsToExitCodes) {
    TempDir dir("cli-exit");
    const auto out = (dir / "o").string();
    const char* bad_config[] = {"lrad", "train", "--held-class", "7", "--out", out.c_str()};
    EXPECT_EQ(cli::main(6, bad_config), cli::kConfigError);

    // A directory whose only image is not decodable: a data error at run time.
    std::filesystem::create_directories(dir / "imgs" / "a");
    std::ofstream(dir / "imgs" / "a" / "x.pgm") << "garbage";
    const auto imgs = (dir / "imgs").string();
    const char* bad_data[] = {"lrad", "eval", "--data", "dir", "--dir", imgs.c_str(), "--held-class", "0",
                              "--out", out.c_str()};
    EXPECT_EQ(cli::main(10, bad_data), cli::kDataError);
}

TEST(Cli, DeterministicRunsReproduceHistoryAndScores) {
    TempDir dir("cli-det");
    write_tiny_config(dir / "c.json");
    std::string history, scores;
    for (int run = 0; run < 2; ++run) {
        const auto out = dir / ("run" + std::to_string(run));
        auto c = parse({"train", "--config", (dir / "c.json").string(), "--out", out.string(), "--deterministic"});
        std::ostringstream sink;
        ASSERT_EQ(cli::run(c, sink), cli::kOk);
        c = parse({"eval", "--config", (dir / "c.json").string(), "--out", out.string(), "--checkpoint",
                   (out / "model.lrad").string(), "--deterministic"});
        ASSERT_EQ(cli::run(c, sink), cli::kOk);
        for (const char* f : {"history.csv", "scores.csv", "roc.csv", "latent3d.csv", "eval_summary.csv"})
            ASSERT_TRUE(std::filesystem::exists(out / f)) << f;
        if (run == 0) {
            history = slurp(out / "history.csv");
            scores = slurp(out / "scores.csv");
        } else {
            EXPECT_EQ(slurp(out / "history.csv"), history);
            EXPECT_EQ(slurp(out / "scores.csv"), scores);
        }
    }
    EXPECT_NE(history.find("iteration,irec,adv_g,adv_d,zrec,rank,total"), std::string::npos);
    EXPECT_EQ(scores.rfind("id,anomaly_flag,score_latent,score_pixel", 0), 0u);
}

TEST(Cli, SynthAndAblateCommands) {
    TempDir dir("cli-synth");
    write_tiny_config(dir / "c.json");
    const auto out = dir / "s";
    auto c = parse({"synth", "--config", (dir / "c.json").string(), "--out", out.string()});
    std::ostringstream sink;
    ASSERT_EQ(cli::run(c, sink), cli::kOk);
    const auto back = read_idx(out / "synth-images-idx3-ubyte", out / "synth-labels-idx1-ubyte");
    EXPECT_EQ(back.size(), 50u);
    EXPECT_EQ(back.height(), 16u);

    // The exported pair reads back through the mnist path (16x16 needs no padding).
    c = parse({"ablate", "--config", (dir / "c.json").string(), "--data", "mnist", "--images",
               (out / "synth-images-idx3-ubyte").string(), "--labels", (out / "synth-labels-idx1-ubyte").string(),
               "--variants", "irec+adv,full", "--epochs", "1", "--out", (dir / "a").string()});
    ASSERT_EQ(cli::run(c, sink), cli::kOk);
    const auto csv = slurp(dir / "a" / "ablation.csv");
    EXPECT_EQ(csv.rfind("variant,auc\nirec+adv,", 0), 0u) << csv;
    EXPECT_NE(csv.find("\nfull,"), std::string::npos);
}
