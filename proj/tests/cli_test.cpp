// End-to-end tests that drive the built CLI binary.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

fs::path scratch_root() {
    static const fs::path root = [] {
        auto dir = fs::temp_directory_path() / ("distvi_cli_test_" + std::to_string(::getpid()));
        fs::remove_all(dir);
        fs::create_directories(dir);
        return dir;
    }();
    return root;
}

fs::path fresh_dir(const std::string& name) {
    auto dir = scratch_root() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

int run_cli(const std::string& args, const fs::path& cwd) {
    const std::string cmd = "cd '" + cwd.string() + "' && '" + DISTVI_CLI_PATH + "' " + args +
                            " >cli_stdout.txt 2>cli_stderr.txt";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
}

std::map<std::string, std::string> read_metrics(const fs::path& path) {
    std::ifstream in(path);
    std::map<std::string, std::string> rows;
    std::string key, value;
    while (in >> key >> value)
        rows[key] = value;
    return rows;
}

} // namespace

TEST(CliOracle, MdpFileMatchesHandSolve) {
    auto dir = fresh_dir("oracle_mdp");
    write_text(dir / "chain.mdp", "3 0.9\n0 0 1 1 1\n1 0 2 1 1\n2 0 2 1 0\n");
    ASSERT_EQ(run_cli("solve-oracle chain.mdp --out out", dir), 0);
    auto jstar = slurp(dir / "out/jstar.txt");
    std::istringstream in(jstar);
    int state = 0;
    double value = 0.0;
    in >> state >> value;
    EXPECT_NEAR(value, 1.9, 1e-9);
    in >> state >> value;
    EXPECT_NEAR(value, 1.0, 1e-9);
    in >> state >> value;
    EXPECT_NEAR(value, 0.0, 1e-9);
}

TEST(CliOracle, NetworkInputWritesSpeedsAndValues) {
    auto dir = fresh_dir("oracle_net");
    write_text(dir / "path.net", "N 0 0 0\nN 1 100 0\nN 2 200 0\nE 0 1 100 20\nE 1 2 50 10\nA 2\n");
    ASSERT_EQ(run_cli("solve-oracle path.net --seed 3 --out out", dir), 0);
    EXPECT_TRUE(fs::exists(dir / "out/jstar.txt"));
    EXPECT_TRUE(fs::exists(dir / "out/speeds.txt"));
    auto metrics = read_metrics(dir / "out/summary.txt");
    EXPECT_EQ(metrics.at("converged"), "1");
    EXPECT_EQ(metrics.at("states"), "3");
}

TEST(CliOracle, RerunsAreByteIdentical) {
    auto dir = fresh_dir("oracle_repeat");
    write_text(dir / "path.net", "N 0 0 0\nN 1 100 0\nE 0 1 100 20\nA 1\n");
    ASSERT_EQ(run_cli("solve-oracle path.net --seed 11 --out a", dir), 0);
    ASSERT_EQ(run_cli("solve-oracle path.net --seed 11 --out b", dir), 0);
    EXPECT_EQ(slurp(dir / "a/jstar.txt"), slurp(dir / "b/jstar.txt"));
    EXPECT_EQ(slurp(dir / "a/speeds.txt"), slurp(dir / "b/speeds.txt"));
}

TEST(CliGenCity, ReproducesBundledNetwork) {
    auto dir = fresh_dir("gen_city");
    ASSERT_EQ(run_cli("gen-city regen.net", dir), 0);
    const auto bundled = fs::path(DISTVI_DATA_DIR) / "grid_city.net";
    ASSERT_TRUE(fs::exists(bundled)) << "bundled network missing";
    EXPECT_EQ(slurp(dir / "regen.net"), slurp(bundled));
}

TEST(CliDistributed, WritesAllOutputsAndConverges) {
    auto dir = fresh_dir("dist_outputs");
    ASSERT_EQ(run_cli("gen-city city.net --rows 7 --cols 7 --seed 5", dir), 0);
    ASSERT_EQ(run_cli("solve-distributed city.net -q 3 --seed 1 --history --out run", dir), 0);
    for (const char* name :
         {"config.txt", "partition.txt", "disagg.txt", "speeds.txt", "values.txt", "jstar.txt",
          "broadcast_log.txt", "metrics.txt", "r_history.txt", "agent_0_values.txt", "agent_2_values.txt"})
        EXPECT_TRUE(fs::exists(dir / "run" / name)) << name;
    auto metrics = read_metrics(dir / "run/metrics.txt");
    EXPECT_EQ(metrics.at("converged"), "1");
}

TEST(CliDistributed, SingleAgentMatchesOracle) {
    auto dir = fresh_dir("dist_q1");
    ASSERT_EQ(run_cli("gen-city city.net --rows 6 --cols 6 --seed 9", dir), 0);
    ASSERT_EQ(run_cli("solve-distributed city.net -q 1 --threshold 0 --seed 2 --out run", dir), 0);
    auto metrics = read_metrics(dir / "run/metrics.txt");
    EXPECT_LT(std::stod(metrics.at("avg_error")), 1e-6);
}

TEST(CliDistributed, RerunsAreByteIdentical) {
    auto dir = fresh_dir("dist_repeat");
    ASSERT_EQ(run_cli("gen-city city.net --rows 6 --cols 7 --seed 13", dir), 0);
    const std::string args = "solve-distributed city.net -q 4 --seed 3 --history --out ";
    ASSERT_EQ(run_cli(args + "a", dir), 0);
    ASSERT_EQ(run_cli(args + "b", dir), 0);
    for (const auto& entry : fs::directory_iterator(dir / "a")) {
        const auto name = entry.path().filename();
        EXPECT_EQ(slurp(entry.path()), slurp(dir / "b" / name)) << name;
    }
}

TEST(CliDistributed, CustomScheduleFile) {
    auto dir = fresh_dir("dist_custom");
    ASSERT_EQ(run_cli("gen-city city.net --rows 5 --cols 5 --seed 21", dir), 0);
    write_text(dir / "ring.sched", "2 1\n0 0 1\n1 1 0\n");
    ASSERT_EQ(run_cli("solve-distributed city.net -q 2 --schedule custom:ring.sched --seed 4 --out run", dir),
              0);
    auto metrics = read_metrics(dir / "run/metrics.txt");
    EXPECT_EQ(metrics.at("converged"), "1");
}

TEST(CliDistributed, ParallelModeMatchesSequential) {
    auto dir = fresh_dir("dist_parallel");
    ASSERT_EQ(run_cli("gen-city city.net --rows 6 --cols 6 --seed 33", dir), 0);
    const std::string args = "solve-distributed city.net -q 4 --seed 6 --out ";
    ASSERT_EQ(run_cli(args + "seq", dir), 0);
    ASSERT_EQ(run_cli(args + "par --parallel 4", dir), 0);
    EXPECT_EQ(slurp(dir / "seq/values.txt"), slurp(dir / "par/values.txt"));
    EXPECT_EQ(slurp(dir / "seq/metrics.txt"), slurp(dir / "par/metrics.txt"));
}

TEST(CliExitCodes, DistinguishFailureKinds) {
    auto dir = fresh_dir("exit_codes");
    // parse failure: malformed MDP record
    write_text(dir / "broken.mdp", "2 0.9\n0 0 1 1\n");
    EXPECT_EQ(run_cli("solve-oracle broken.mdp --out out1", dir), 2);
    // parse failure: missing file
    EXPECT_EQ(run_cli("solve-oracle nowhere.net --out out2", dir), 2);
    // validation failure: discount out of range
    write_text(dir / "tiny.net", "N 0 0 0\nN 1 100 0\nE 0 1 100 20\nA 1\n");
    EXPECT_EQ(run_cli("solve-distributed tiny.net -q 1 --alpha 1.5 --out out3", dir), 3);
    // non-convergence
    ASSERT_EQ(run_cli("gen-city city.net --rows 5 --cols 5 --seed 2", dir), 0);
    EXPECT_EQ(run_cli("solve-distributed city.net -q 2 --max-iters 1 --seed 0 --out out4", dir), 4);
    auto metrics = read_metrics(dir / "out4/metrics.txt");
    EXPECT_EQ(metrics.at("converged"), "0");
}

TEST(CliDistributed, ConfigFileSuppliesDefaultsFlagsOverride) {
    auto dir = fresh_dir("dist_config");
    ASSERT_EQ(run_cli("gen-city city.net --rows 6 --cols 6 --seed 2", dir), 0);
    write_text(dir / "run.cfg",
               "alpha 0.9\nc_threshold 0\ntolerance 1e-9\nmax_iters 50000\nschedule complete\n"
               "window_b 0\nseed 8\nrecord_history 1\n");
    ASSERT_EQ(run_cli("solve-distributed city.net -q 2 --config run.cfg --out a", dir), 0);
    EXPECT_TRUE(fs::exists(dir / "a/r_history.txt")); // from the file
    // equivalent run spelled out via flags
    ASSERT_EQ(run_cli("solve-distributed city.net -q 2 --tolerance 1e-9 --threshold 0 --seed 8 "
                      "--history --out b",
                      dir),
              0);
    EXPECT_EQ(slurp(dir / "a/values.txt"), slurp(dir / "b/values.txt"));
    // an explicit flag wins over the file
    ASSERT_EQ(run_cli("solve-distributed city.net -q 2 --config run.cfg --seed 9 --out c", dir), 0);
    EXPECT_NE(slurp(dir / "a/speeds.txt"), slurp(dir / "c/speeds.txt"));
}

TEST(CliDistributed, HugeThresholdRunsOnStalenessAlone) {
    auto dir = fresh_dir("dist_staleness");
    ASSERT_EQ(run_cli("gen-city city.net --rows 6 --cols 6 --seed 3", dir), 0);
    ASSERT_EQ(run_cli("solve-distributed city.net -q 3 --threshold 1e9 --schedule round-robin "
                      "--window-b 2 --seed 1 --out run",
                      dir),
              0);
    auto metrics = read_metrics(dir / "run/metrics.txt");
    EXPECT_EQ(metrics.at("converged"), "1");
    EXPECT_GT(std::stoll(metrics.at("messages")), 0);
}

TEST(CliSweep, TableIsDeterministicAndNearZeroForOneAgent) {
    auto dir = fresh_dir("sweep");
    ASSERT_EQ(run_cli("gen-city city.net --rows 6 --cols 6 --seed 44", dir), 0);
    const std::string args = "sweep-agents city.net --q-list 1,2 --seeds 0,1 --out ";
    ASSERT_EQ(run_cli(args + "a", dir), 0);
    ASSERT_EQ(run_cli(args + "b", dir), 0);
    EXPECT_EQ(slurp(dir / "a/sweep.txt"), slurp(dir / "b/sweep.txt"));
    std::ifstream in(dir / "a/sweep.txt");
    std::string header;
    std::getline(in, header);
    int q = 0, failures = 0;
    double mean = 0.0, stddev = 0.0;
    in >> q >> mean >> stddev >> failures;
    EXPECT_EQ(q, 1);
    EXPECT_LT(mean, 1e-6);
    EXPECT_EQ(failures, 0);
}
