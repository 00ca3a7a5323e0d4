#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "unitbox/cli.hpp"
#include "unitbox/report_io.hpp"
#include "unitbox/run_config.hpp"
#include "unitbox/training.hpp"

using namespace unitbox;
namespace fs = std::filesystem;

namespace {

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("unitbox_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    fs::path write_config(const std::string& name, nlohmann::json j) {
        j["output_dir"] = (dir_ / "runs").string();
        const fs::path file = dir_ / (name + ".json");
        std::ofstream(file) << j.dump(2);
        return file;
    }

    nlohmann::json tiny_config(const std::string& name) const {
        return {{"config_version", 1},
                {"name", name},
                {"iterations", 8},
                {"checkpoint_stride", 4},
                {"eval_scenes", 6},
                {"data", {{"batch", 2}}},
                {"optimizer", {{"learning_rate", 0.01}}}};
    }

    int run(std::vector<std::string> args) {
        args.insert(args.begin(), "unitbox");
        return run_cli(args);
    }

    fs::path dir_;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST(RunConfigJson, RoundTrip) {
    RunConfig c;
    c.name = "x";
    c.loss = BoxLossKind::l2;
    c.network.stem_channels = {4, 8};
    c.network.box_tap_stage = 2;
    c.data.noise = 0.01;
    const RunConfig back = run_config_from_json(nlohmann::json::parse(to_json(c).dump()));
    EXPECT_EQ(back, c);
}

TEST(RunConfigJson, StrictParsing) {
    const auto expect_error = [](const nlohmann::json& j, const std::string& prefix) {
        try {
            run_config_from_json(j);
            ADD_FAILURE() << "accepted " << j.dump();
        } catch (const ConfigError& e) {
            EXPECT_EQ(std::string(e.what()).rfind(prefix, 0), 0u) << e.what();
        }
    };
    expect_error({{"name", "a"}}, "config_version");
    expect_error({{"config_version", 2}}, "config_version");
    expect_error({{"config_version", 1}, {"iterationz", 5}}, "iterationz");
    expect_error({{"config_version", 1}, {"data", {{"noise", "high"}}}}, "data.noise");
    expect_error({{"config_version", 1}, {"loss", "huber"}}, "loss");
    expect_error({{"config_version", 1}, {"optimizer", {{"momentum", 1.5}}}}, "optimizer");
    expect_error({{"config_version", 1}, {"network", {{"stem_channels", {8, "a"}}}}}, "network.stem_channels[1]");
}

TEST_F(CliTest, UsageErrorsExitTwo) {
    EXPECT_EQ(run({}), kExitUsage);
    EXPECT_EQ(run({"frobnicate"}), kExitUsage);
    EXPECT_EQ(run({"gradcheck", "--n", "abc"}), kExitUsage);
    EXPECT_EQ(run({"train"}), kExitUsage);
}

TEST_F(CliTest, GradcheckExitCodes) {
    const std::string out = (dir_ / "gc.csv").string();
    EXPECT_EQ(run({"gradcheck", "--output", out}), kExitOk);
    EXPECT_TRUE(fs::exists(out));
    EXPECT_EQ(run({"gradcheck", "--tol", "0", "--output", out}), kExitFailure);
    EXPECT_EQ(run({"gradcheck", "--n", "0", "--output", out}), kExitOk);
}

TEST_F(CliTest, DumpSampleWritesSixImages) {
    const fs::path out = dir_ / "dump";
    ASSERT_EQ(run({"dump-sample", "--seed", "3", "--index", "2", "--output-dir", out.string()}), kExitOk);
    int pgm = 0;
    for (const auto& e : fs::directory_iterator(out)) pgm += e.path().extension() == ".pgm";
    EXPECT_EQ(pgm, 6);
    const PgmImage img = read_pgm(out / "image.pgm");
    EXPECT_EQ(img.width, 64);
    EXPECT_EQ(img.height, 64);
    EXPECT_TRUE(fs::exists(out / "scale.txt"));
}

TEST_F(CliTest, TrainIsDeterministicAndLogsFromIterationZero) {
    const auto cfg = write_config("a", tiny_config("a"));
    const fs::path root = dir_ / "runs" / "a";
    const auto snapshot = [&] {
        std::vector<std::string> files{slurp(root / "logs" / "train_log.csv")};
        for (const char* f : {"iter_000000.ckpt", "iter_000004.ckpt", "iter_000008.ckpt"}) {
            EXPECT_TRUE(fs::exists(root / "checkpoints" / f)) << f;
            files.push_back(slurp(root / "checkpoints" / f));
        }
        return files;
    };
    ASSERT_EQ(run({"train", cfg.string()}), kExitOk);
    const auto first = snapshot();
    fs::remove_all(root);
    ASSERT_EQ(run({"train", cfg.string()}), kExitOk);
    EXPECT_EQ(snapshot(), first);

    const std::string& log = first[0];
    EXPECT_EQ(log.substr(0, log.find('\n')), "iteration,combined_loss,conf_loss,box_loss");
    EXPECT_EQ(log.substr(log.find('\n') + 1, 2), "0,");
    EXPECT_EQ(std::count(log.begin(), log.end(), '\n'), 9);
}

TEST_F(CliTest, TrainRejectsBadConfig) {
    auto j = tiny_config("bad");
    j["data"]["nosie"] = 0.1;
    EXPECT_EQ(run({"train", write_config("bad", j).string()}), kExitFailure);
    EXPECT_EQ(run({"train", (dir_ / "missing.json").string()}), kExitFailure);
}

TEST_F(CliTest, TrainReportsDivergence) {
    auto j = tiny_config("hot");
    j["loss"] = "l2";
    j["optimizer"]["learning_rate"] = 1e6;
    j["optimizer"]["momentum"] = 0.0;
    EXPECT_EQ(run({"train", write_config("hot", j).string()}), kExitFailure);
}

TEST_F(CliTest, EvalAndScaleSweep) {
    const auto cfg = write_config("e", tiny_config("e"));
    ASSERT_EQ(run({"train", cfg.string()}), kExitOk);
    const fs::path ckpt = dir_ / "runs" / "e" / "checkpoints" / "iter_000008.ckpt";
    const fs::path out = dir_ / "eval";
    ASSERT_EQ(run({"eval", ckpt.string(), "--output-dir", out.string(), "--threads", "2"}), kExitOk);
    for (const char* f : {"metrics.csv", "roc.csv", "detections.csv"}) EXPECT_TRUE(fs::exists(out / f)) << f;
    EXPECT_EQ(run({"eval", (dir_ / "nope.ckpt").string()}), kExitFailure);

    const fs::path sweep = dir_ / "sweep.csv";
    ASSERT_EQ(run({"scale-sweep", ckpt.string(), ckpt.string(), "--output", sweep.string()}), kExitOk);
    const std::string text = slurp(sweep);
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 9);
    EXPECT_EQ(run({"scale-sweep", ckpt.string(), ckpt.string(), "--factors", "0.05"}), kExitFailure);
}

TEST_F(CliTest, CompareWritesCurvesOnOneGrid) {
    const auto cfg = write_config("cmp", tiny_config("cmp"));
    ASSERT_EQ(run({"compare", cfg.string(), "--lr-grid", "0.001,0.01", "--selection-fraction", "0.5", "--svg"}),
              kExitOk);
    const fs::path curves = dir_ / "runs" / "cmp" / "curves";
    const std::string conv = slurp(curves / "convergence.csv");
    std::vector<std::string> iou, l2;
    std::istringstream in(conv);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "model,iteration,miss_rate");
    while (std::getline(in, line)) {
        const auto first = line.find(','), second = line.find(',', first + 1);
        (line.substr(0, first) == "iou" ? iou : l2).push_back(line.substr(first + 1, second - first - 1));
    }
    EXPECT_EQ(iou, l2);
    EXPECT_EQ(iou.size(), 3u);
    for (const char* f : {"roc.csv", "lr_search.csv", "summary.csv", "convergence.svg", "roc.svg"})
        EXPECT_TRUE(fs::exists(curves / f)) << f;
    EXPECT_TRUE(fs::exists(dir_ / "runs" / "cmp_iou" / "checkpoints" / "iter_000008.ckpt"));
    EXPECT_TRUE(fs::exists(dir_ / "runs" / "cmp_l2" / "logs" / "train_log.csv"));
}

TEST_F(CliTest, CompareRejectsMismatchedArms) {
    auto j = tiny_config("m");
    const auto a = write_config("m1", j);
    j["data_seed"] = 5;
    const auto b = write_config("m2", j);
    EXPECT_EQ(run({"compare", a.string(), b.string(), "--lr-grid", "0.01"}), kExitFailure);
}
