#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "soo/cli.hpp"

using namespace soo;
using namespace soo::cli;
namespace fs = std::filesystem;

namespace {

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("soo_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    fs::path write(const std::string& name, const std::string& text) {
        const fs::path p = dir_ / name;
        std::ofstream(p) << text;
        return p;
    }

    static std::string slurp(const fs::path& p) {
        std::ifstream is(p, std::ios::binary);
        std::stringstream ss;
        ss << is.rdbuf();
        return ss.str();
    }

    int call(int (*cmd)(const CommandOptions&, std::ostream&, std::ostream&), const CommandOptions& opts) {
        out_.str("");
        err_.str("");
        return dispatch(cmd, opts, out_, err_);
    }

    int shell(const std::string& args) {
        const std::string cmd = std::string(SOO_CLI_PATH) + " " + args + " >" + (dir_ / "stdout.txt").string() +
                                " 2>" + (dir_ / "stderr.txt").string();
        const int rc = std::system(cmd.c_str());
        return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
    }

    fs::path dir_;
    std::ostringstream out_, err_;
};

const char* kSmall = R"({
  "problem": {"A": [[1, 0], [0, 3]], "b": [1, -1], "c0": 0},
  "noise": {"kind": "sphere", "radius": 1},
  "setting": 1,
  "eta": 5,
  "steps": 2000,
  "n_runs": 40,
  "seed": 9
})";

}  // namespace

TEST(ParseConfig, DefaultsAndFields) {
    const auto cfg = parse_config(nlohmann::json::parse(kSmall));
    EXPECT_EQ(cfg.problem.dim(), 2u);
    EXPECT_EQ(cfg.setting, 1);
    EXPECT_EQ(cfg.eta_mode, EtaMode::Value);
    EXPECT_EQ(cfg.eta, 5.0);
    EXPECT_EQ(cfg.theta, 1.0);
    EXPECT_EQ(cfg.gamma, 0.1);
    EXPECT_EQ(cfg.init_radius, 10.0);
    EXPECT_EQ(cfg.n_runs, 40u);
    EXPECT_EQ(cfg.kind(), SampleKind::ScaledLast);
}

TEST(ParseConfig, Rejections) {
    auto bad = [](const std::string& text) { return [text] { parse_config(nlohmann::json::parse(text)); }; };
    EXPECT_THROW(bad(R"({"setting": 1, "eta": 5})")(), ConfigError);
    EXPECT_THROW(bad(R"({"problem": {"A": [[1,0],[0,1]]}, "eta": 5, "typo": 1})")(), ConfigError);
    EXPECT_THROW(bad(R"({"problem": {"A": [[1,0],[0,1]]}, "setting": 1, "eta": "optimal"})")(), ConfigError);
    EXPECT_THROW(bad(R"({"problem": {"A": [[1,0],[0,1]]}, "setting": 1})")(), ConfigError);
    EXPECT_THROW(bad(R"({"problem": {"A": [[1,0],[0,1]]}, "setting": 2, "eta": 5})")(), ConfigError);
    EXPECT_THROW(bad(R"({"problem": {"A": [[1,0],[0,1]]}, "setting": 4, "eta": 5})")(), ConfigError);
    EXPECT_THROW(bad(R"({"problem": {"A": [[1,0],[0,-1]]}, "eta": 5})")(), ConfigError);
    EXPECT_THROW(bad(R"({"problem": {"A": [[1,0],[0]]}, "eta": 5})")(), ConfigError);
    EXPECT_THROW(bad(R"({"problem": {"A": [[1,0],[0,1]], "b": [1]}, "eta": 5})")(), ConfigError);
    EXPECT_THROW(bad(R"({"problem": {"A": [[1,0],[0,1]]}, "eta": 5, "noise": {"kind": "cube"}})")(), ConfigError);
    EXPECT_THROW(bad(R"({"problem": {"A": [[1,0],[0,1]]}, "eta": 5, "theta": 0.5})")(), ConfigError);
    EXPECT_THROW(bad(R"({"problem": {"A": [[1,0],[0,1]]}, "eta": 5, "n_runs": 1})")(), ConfigError);
    EXPECT_NO_THROW(bad(R"({"problem": {"A": [[1,0],[0,1]]}, "setting": 3})")());
}

TEST_F(CliTest, ParseErrorNamesLine) {
    const auto cfg = write("broken.json", "{\n  \"problem\": {\n    \"A\": [[1, 0], [0, 1]],,\n  }\n}\n");
    EXPECT_EQ(call(cmd_theory, {.config = cfg}), kConfig);
    EXPECT_NE(err_.str().find("line 3"), std::string::npos) << err_.str();
}

TEST_F(CliTest, UnknownFieldExitsTwo) {
    const auto cfg = write("typo.json", R"({"problem": {"A": [[1,0],[0,1]]}, "eta": 5, "stpes": 10})");
    EXPECT_EQ(call(cmd_theory, {.config = cfg}), kConfig);
    EXPECT_NE(err_.str().find("stpes"), std::string::npos);
}

TEST_F(CliTest, TheoryDefaultContext) {
    const auto cfg = write("default.json", R"({"problem": {"A": [[1,0],[0,1]]}, "setting": 2})");
    ASSERT_EQ(call(cmd_theory, {.config = cfg}), kOk) << err_.str();
    const auto j = nlohmann::json::parse(out_.str());
    const double pi = std::numbers::pi;
    EXPECT_NEAR(j["eta_opt"].get<double>(), pi, 1e-12);
    EXPECT_NEAR(j["V_avg"][0][0].get<double>(), 2.0, 1e-12);
    EXPECT_NEAR(j["V_avg"][1][1].get<double>(), 2.0, 1e-12);
    EXPECT_NEAR(j["gap_eigenvalues"][0].get<double>(), pi * pi / 2.0 - 2.0, 1e-9);
    EXPECT_NEAR(j["V_last_at_eta_opt"][0][0].get<double>(), pi * pi / 2.0, 1e-9);
    EXPECT_TRUE(j["hurwitz"].get<bool>());
    EXPECT_EQ(j["alpha"], 1.0);
}

TEST_F(CliTest, TheoryBallAlphaAndPerMatrixErrors) {
    const auto cfg = write("ball.json", R"({"problem": {"A": [[1,0],[0,1]]}, "noise": {"kind": "ball", "radius": 2},
                                            "setting": 1, "eta": 0.5})");
    ASSERT_EQ(call(cmd_theory, {.config = cfg, .out_dir = dir_ / "th"}), kOk) << err_.str();
    const auto j = nlohmann::json::parse(out_.str());
    EXPECT_DOUBLE_EQ(j["alpha"].get<double>(), 1.0);
    EXPECT_TRUE(j["V_last_at_eta"].contains("error"));
    EXPECT_TRUE(j["V_last_at_eta_opt"].is_array());
    EXPECT_TRUE(j["V_avg"].is_array());
    EXPECT_EQ(nlohmann::json::parse(slurp(dir_ / "th" / "theory.json")), j);
}

TEST_F(CliTest, SimulateWritesFilesAndIsIdempotent) {
    const auto cfg = write("small.json", kSmall);
    CommandOptions opts{.config = cfg, .out_dir = dir_ / "run", .threads = 2};
    ASSERT_EQ(call(cmd_simulate, opts), kOk) << err_.str();
    const std::string samples = slurp(dir_ / "run" / "samples.csv");
    const std::string report = slurp(dir_ / "run" / "report.json");
    const std::string hist = slurp(dir_ / "run" / "histogram.csv");
    EXPECT_EQ(samples.substr(0, 13), "run_id,x0,x1\n");
    opts.threads = 1;
    ASSERT_EQ(call(cmd_simulate, opts), kOk);
    EXPECT_EQ(slurp(dir_ / "run" / "samples.csv"), samples);
    EXPECT_EQ(slurp(dir_ / "run" / "report.json"), report);
    EXPECT_EQ(slurp(dir_ / "run" / "histogram.csv"), hist);

    const auto j = nlohmann::json::parse(report);
    EXPECT_EQ(j["setting"], 1);
    EXPECT_EQ(j["n_runs"], 40);
    EXPECT_EQ(j["parameters"]["eta"], 5.0);
    EXPECT_TRUE(j["theoretical"].is_array());
}

TEST_F(CliTest, SimulateOptimalRecordsEta0) {
    const auto cfg = write("s2.json", R"({"problem": {"A": [[1,0],[0,1]]}, "setting": 2, "steps": 500, "n_runs": 20})");
    ASSERT_EQ(call(cmd_simulate, {.config = cfg, .out_dir = dir_}), kOk) << err_.str();
    const auto j = nlohmann::json::parse(slurp(dir_ / "report.json"));
    EXPECT_NEAR(j["parameters"]["eta"].get<double>(), std::numbers::pi, 1e-12);
    EXPECT_EQ(j["parameters"]["eta"], j["parameters"]["eta_opt"]);
}

TEST_F(CliTest, RunsAndStepsOverrides) {
    const auto cfg = write("small.json", kSmall);
    ASSERT_EQ(call(cmd_simulate, {.config = cfg, .out_dir = dir_, .runs = 7, .steps = 10}), kOk);
    const auto j = nlohmann::json::parse(slurp(dir_ / "report.json"));
    EXPECT_EQ(j["n_runs"], 7);
    EXPECT_EQ(j["steps"], 10);
}

TEST_F(CliTest, SimulateBelowThresholdKeepsSamples) {
    const auto cfg = write("low.json", R"({"problem": {"A": [[1,0],[0,1]]}, "setting": 1, "eta": 1,
                                           "steps": 100, "n_runs": 5})");
    ASSERT_EQ(call(cmd_simulate, {.config = cfg, .out_dir = dir_}), kOk) << err_.str();
    const auto j = nlohmann::json::parse(slurp(dir_ / "report.json"));
    EXPECT_TRUE(j["theoretical"].is_null());
    EXPECT_TRUE(j.contains("theory_error"));
}

TEST_F(CliTest, DivergenceExitsThree) {
    const auto cfg = write("div.json", R"({"problem": {"A": [[1e-10,0],[0,1e-10]], "b": [1e300, 1e300]},
                                           "setting": 1, "eta": 5, "steps": 5, "n_runs": 3})");
    EXPECT_EQ(call(cmd_simulate, {.config = cfg, .out_dir = dir_}), kDivergence);
    EXPECT_NE(err_.str().find("failed run indices: 0 1 2"), std::string::npos) << err_.str();
}

TEST_F(CliTest, CompareEmptyCsvExitsTwo) {
    const auto cfg = write("small.json", kSmall);
    const auto csv = write("empty.csv", "");
    EXPECT_EQ(call(cmd_compare, {.config = cfg, .out_dir = dir_, .samples = csv}), kConfig);
    const auto wrong = write("wrong.csv", "run_id,x0,x1,x2\n0,1,2,3\n1,1,2,3\n");
    EXPECT_EQ(call(cmd_compare, {.config = cfg, .out_dir = dir_, .samples = wrong}), kConfig);
}

TEST_F(CliTest, CompareExactGaussianSamples) {
    const auto cfg_path = write("small.json", kSmall);
    const auto cfg = load_config(cfg_path);
    const TheoryContext ctx(cfg.problem, cfg.noise);
    const SymMatrix v = v_last_iterate(ctx, 5.0);
    const SymMatrix root = sqrt_spd(v);
    const std::size_t n = 1000000;
    RngStream s(77, 0);
    std::vector<double> rows(2 * n);
    for (std::size_t r = 0; r < n; ++r) {
        const Vector z{s.gaussian(), s.gaussian()};
        const Vector y = root * z;
        rows[2 * r] = y[0];
        rows[2 * r + 1] = y[1];
    }
    write_samples_csv(dir_ / "exact.csv", SampleMatrix(SampleKind::ScaledLast, n, 2, std::move(rows)));

    ASSERT_EQ(call(cmd_compare, {.config = cfg_path, .out_dir = dir_, .samples = dir_ / "exact.csv"}), kOk)
        << err_.str();
    const auto j = nlohmann::json::parse(slurp(dir_ / "report.json"));
    EXPECT_LT(j["frobenius_rel_err"].get<double>(), 0.01);
    EXPECT_LT(j["standardized_rel_err"].get<double>(), 0.01);

    ASSERT_EQ(call(cmd_estimate, {.config = cfg_path, .samples = dir_ / "exact.csv"}), kOk) << err_.str();
    const auto e = nlohmann::json::parse(out_.str());
    EXPECT_NEAR(e["c_alpha"].get<double>(), ctx.c * ctx.alpha, 1e-2);
    const double implied = e["eta_opt_implied"].get<double>();
    EXPECT_NEAR(implied, eta_opt(ctx), eta_opt(ctx) * 1e-2 / (ctx.c * ctx.alpha - 1e-2));
}

TEST_F(CliTest, EstimateNeedsNumericEta) {
    const auto cfg = write("s3.json", R"({"problem": {"A": [[1,0],[0,1]]}, "setting": 3})");
    const auto csv = write("s.csv", "run_id,x0,x1\n0,1,2\n1,2,3\n");
    EXPECT_EQ(call(cmd_estimate, {.config = cfg, .samples = csv}), kConfig);
}

TEST_F(CliTest, EstimateDegenerateExitsFour) {
    const auto cfg = write("small.json", kSmall);
    const auto csv = write("zero.csv", "run_id,x0,x1\n0,0,0\n1,0,0\n");
    EXPECT_EQ(call(cmd_estimate, {.config = cfg, .samples = csv}), kEstimation);
}

TEST_F(CliTest, ExecutableExitCodes) {
    const auto cfg = write("small.json", kSmall);
    EXPECT_EQ(shell("theory --config " + cfg.string()), 0);
    EXPECT_EQ(shell("theory --config " + (dir_ / "missing.json").string()), 2);
    EXPECT_EQ(shell("simulate"), 2);
    EXPECT_EQ(shell("bogus --config x"), 2);
    EXPECT_EQ(shell("simulate --config " + cfg.string() + " --out " + (dir_ / "o").string() +
                    " --runs 5 --steps 20 --threads 1"),
              0);
    EXPECT_TRUE(fs::exists(dir_ / "o" / "samples.csv"));
    const auto empty = write("empty.csv", "");
    EXPECT_EQ(shell("compare --config " + cfg.string() + " " + empty.string()), 2);
}

TEST(ShippedConfigs, AllParse) {
    for (const auto& entry : fs::directory_iterator(SOO_CONFIG_DIR)) {
        if (entry.path().extension() != ".json") continue;
        EXPECT_NO_THROW(load_config(entry.path())) << entry.path();
    }
}
