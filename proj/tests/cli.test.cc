// Copyright 2026 The nsqm Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cli.h"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "gtest/gtest.h"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

struct Invocation {
    int code = -1;
    std::string out;
    std::string err;
};

Invocation reduce(std::vector<std::string> args) {
    args.insert(args.begin(), "reduce");
    std::vector<const char *> argv;
    for (const auto &a : args) {
        argv.push_back(a.c_str());
    }
    std::ostringstream out, err;
    Invocation r;
    r.code = nsqm::cli::run((int)argv.size(), argv.data(), out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

std::string slurp(const fs::path &path) {
    std::ifstream file(path, std::ios::binary);
    std::stringstream buffer;
    buffer << file.rdbuf();
    return buffer.str();
}

fs::path scratch(const std::string &name) {
    fs::path dir = fs::temp_directory_path() / ("nsqm_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

int shell(const std::string &command) {
    int status = std::system(command.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(cli, help_exits_zero) {
    Invocation r = reduce({"--help"});
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("born"), std::string::npos);
}

TEST(cli, subcommand_required) {
    EXPECT_EQ(reduce({}).code, nsqm::cli::kExitInvalid);
}

TEST(cli, malformed_weights_exit_2) {
    fs::path dir = scratch("malformed");
    Invocation r = reduce({"born", "--weights", "0.3,0.6", "--out", dir.string()});
    EXPECT_EQ(r.code, nsqm::cli::kExitInvalid);
    EXPECT_NE(r.err.find("sum to"), std::string::npos) << r.err;
    EXPECT_FALSE(fs::exists(dir / "summary.json"));
}

TEST(cli, unknown_option_and_config_key_rejected) {
    fs::path dir = scratch("unknown");
    EXPECT_EQ(reduce({"born", "--weights", "0.5,0.5", "--bogus", "1"}).code, nsqm::cli::kExitInvalid);
    std::ofstream(dir / "bad.ini") << "seed=3\n[born]\nweights=[0.5,0.5]\nbogus=2\n";
    Invocation r = reduce({"born", "--config", (dir / "bad.ini").string(), "--out", dir.string()});
    EXPECT_EQ(r.code, nsqm::cli::kExitInvalid);
    EXPECT_NE(r.err.find("bogus"), std::string::npos) << r.err;
    EXPECT_EQ(reduce({"born", "--config", (dir / "missing.ini").string()}).code, nsqm::cli::kExitInvalid);
}

TEST(cli, invalid_values_exit_2) {
    EXPECT_EQ(reduce({"born", "--weights", "0.5,0.5", "--threads", "zero"}).code, nsqm::cli::kExitInvalid);
    EXPECT_EQ(reduce({"attenuation", "--mode", "mirror"}).code, nsqm::cli::kExitInvalid);
    EXPECT_EQ(reduce({"renninger", "--r1", "3", "--r2", "2", "--events", "1000"}).code, nsqm::cli::kExitInvalid);
    EXPECT_EQ(reduce({"reduction", "--weights", "0.5,0.5", "--sigma_matrix", "0,1;2,0"}).code,
              nsqm::cli::kExitInvalid);
    EXPECT_EQ(reduce({"reduction", "--weights", "0.5,0.5", "--n_states", "3"}).code, nsqm::cli::kExitInvalid);
}

TEST(cli, unwritable_output_exit_4) {
    fs::path dir = scratch("unwritable");
    std::ofstream(dir / "blocker") << "file";
    Invocation r = reduce({"dispersion", "--M", "64", "--out", (dir / "blocker" / "sub").string()});
    EXPECT_EQ(r.code, nsqm::cli::kExitIo);
    EXPECT_FALSE(r.err.empty());
}

TEST(cli, born_writes_summary_csv_and_config) {
    fs::path dir = scratch("born");
    Invocation r = reduce({"born", "--weights", "0.5,0.3,0.2", "--traj", "500", "--seed", "9", "--out", dir.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    for (const char *name : {"summary.json", "config.ini", "trajectories.csv", "weights.csv", "moments.csv"}) {
        EXPECT_TRUE(fs::exists(dir / name)) << name;
    }
    auto summary = nlohmann::json::parse(slurp(dir / "summary.json"));
    EXPECT_EQ(summary["experiment"], "born");
    EXPECT_EQ(summary["seed"], 9);
    EXPECT_EQ(summary["results"]["n_traj"], 500);
    EXPECT_EQ(summary["results"]["survivor_frequencies"].size(), 3u);
    for (const auto &c : summary["checks"]) {
        EXPECT_TRUE(c.contains("measured") && c.contains("expected") && c.contains("tolerance"));
    }
    std::string trajectories = slurp(dir / "trajectories.csv");
    EXPECT_EQ(trajectories.rfind("trajectory_id,survivor,steps\n", 0), 0u);
    EXPECT_EQ(std::count(trajectories.begin(), trajectories.end(), '\n'), 501);
    std::string config = slurp(dir / "config.ini");
    EXPECT_NE(config.find("[born]"), std::string::npos);
    EXPECT_NE(config.find("weights=[0.5,0.3,0.2]"), std::string::npos) << config;
}

TEST(cli, check_failure_exit_3_only_with_flag) {
    fs::path dir = scratch("checkfail");
    std::vector<std::string> args{"reduction", "--weights", "0.5,0.5", "--drift_sign", "-1", "--max_steps", "500",
                                  "--n_traj", "100", "--out", dir.string()};
    EXPECT_EQ(reduce(args).code, 0);
    args.push_back("--check");
    Invocation r = reduce(args);
    EXPECT_EQ(r.code, nsqm::cli::kExitCheckFailed);
    EXPECT_NE(r.out.find("FAIL  unfinished"), std::string::npos) << r.out;
    auto summary = nlohmann::json::parse(slurp(dir / "summary.json"));
    EXPECT_FALSE(summary["pass"].get<bool>());
}

TEST(cli, csv_outputs_independent_of_threads) {
    struct Case {
        std::vector<std::string> args;
        std::vector<std::string> files;
    };
    std::vector<Case> cases{
        {{"born", "--weights", "0.3,0.7", "--traj", "300", "--record_every", "500", "--record_count", "10"},
         {"trajectories.csv", "weights.csv", "moments.csv"}},
        {{"epr", "--a", "0", "--b", "0.4", "--pairs", "4000", "--chsh", "true"}, {"events.csv"}},
        {{"decay", "--nuclei", "1000", "--p_c", "0.3"}, {"survival.csv", "events.csv"}},
        {{"attenuation", "--events", "2000", "--mode", "chopper"}, {"histogram.csv", "events.csv"}},
        {{"sg", "--events", "1000", "--detector", "false"}, {"events.csv"}},
    };
    fs::path root = scratch("threads");
    for (size_t i = 0; i < cases.size(); i++) {
        std::vector<std::string> files;
        for (const char *threads : {"1", "3"}) {
            fs::path dir = root / (std::to_string(i) + "_" + threads);
            auto args = cases[i].args;
            args.insert(args.end(), {"--seed", "5", "--threads", threads, "--out", dir.string()});
            ASSERT_EQ(reduce(args).code, 0) << cases[i].args[0];
        }
        for (const auto &f : cases[i].files) {
            std::string one = slurp(root / (std::to_string(i) + "_1") / f);
            EXPECT_FALSE(one.empty()) << f;
            EXPECT_EQ(one, slurp(root / (std::to_string(i) + "_3") / f)) << cases[i].args[0] << " " << f;
        }
    }
}

TEST(cli, resolved_config_reruns_identically) {
    fs::path root = scratch("roundtrip");
    ASSERT_EQ(reduce({"epr", "--a", "0.1", "--b", "0.7", "--pairs", "4000", "--chsh", "true", "--seed", "17", "--out",
                      (root / "first").string()})
                  .code,
              0);
    ASSERT_EQ(reduce({"epr", "--config", (root / "first" / "config.ini").string(), "--out", (root / "second").string()})
                  .code,
              0);
    EXPECT_EQ(slurp(root / "first" / "events.csv"), slurp(root / "second" / "events.csv"));
    auto a = nlohmann::json::parse(slurp(root / "first" / "summary.json"));
    auto b = nlohmann::json::parse(slurp(root / "second" / "summary.json"));
    EXPECT_EQ(a["results"], b["results"]);
    EXPECT_EQ(b["seed"], 17);
}

TEST(cli, module_outputs_have_declared_columns) {
    fs::path root = scratch("columns");
    ASSERT_EQ(reduce({"noise", "--count", "200", "--trials", "400", "--lags", "5", "--out", (root / "n").string()}).code,
              0);
    EXPECT_EQ(slurp(root / "n" / "correlation.csv").rfind("tau,xi_closed,xi_empirical,stderr\n", 0), 0u);
    ASSERT_EQ(reduce({"reduction", "--weights", "0.5,0.5", "--n_traj", "50", "--record_every", "100", "--record_count",
                      "5", "--out", (root / "r").string()})
                  .code,
              0);
    EXPECT_EQ(slurp(root / "r" / "moments.csv").rfind("t,pair,product_moment,stderr\n", 0), 0u);
    ASSERT_EQ(reduce({"dispersion", "--M", "64", "--check", "--out", (root / "d").string()}).code, 0);
    std::string dispersion = slurp(root / "d" / "dispersion.csv");
    EXPECT_EQ(std::count(dispersion.begin(), dispersion.end(), '\n'), 66);
    ASSERT_EQ(reduce({"tail", "--M", "4096", "--t", "0.5", "--points", "11", "--check", "--out",
                      (root / "t").string()})
                  .code,
              0);
    ASSERT_EQ(reduce({"mz", "--events", "2000", "--object", "false", "--check", "--out", (root / "m").string()}).code,
              0);
    ASSERT_EQ(
        reduce({"renninger", "--events", "2000", "--f", "0.25", "--out", (root / "rn").string()}).code, 0);
    EXPECT_TRUE(fs::exists(root / "rn" / "events.csv"));
}

TEST(cli, check_subcommand_reports_every_criterion_field) {
    fs::path dir = scratch("check");
    Invocation r = reduce({"check", "--only", "5,6", "--out", dir.string()});
    EXPECT_EQ(r.code, 0) << r.out;
    auto report = nlohmann::json::parse(slurp(dir / "acceptance.json"));
    ASSERT_EQ(report["criteria"].size(), 2u);
    for (const auto &c : report["criteria"]) {
        EXPECT_TRUE(c["pass"].get<bool>());
        for (const auto &k : c["checks"]) {
            EXPECT_TRUE(k.contains("measured") && k.contains("expected") && k.contains("tolerance"));
        }
    }
}

TEST(cli, negative_control_fails_product_decay) {
    fs::path dir = scratch("negative");
    Invocation r = reduce({"check", "--only", "3", "--negative_control", "--out", dir.string()});
    EXPECT_EQ(r.code, nsqm::cli::kExitCheckFailed);
    EXPECT_NE(r.out.find("FAIL   3 product_decay"), std::string::npos) << r.out;
}

TEST(cli, binary_born_example_passes_check) {
    fs::path dir = scratch("binary");
    std::string cmd = std::string(NSQM_REDUCE_BINARY) + " born --weights 0.3,0.7 --traj 20000 --seed 42 --check --out " +
                      dir.string() + " > /dev/null";
    EXPECT_EQ(shell(cmd), 0);
    std::string bad = std::string(NSQM_REDUCE_BINARY) + " born --weights 0.3,0.6 --out " + dir.string() +
                      " > /dev/null 2>&1";
    EXPECT_EQ(shell(bad), 2);
}
