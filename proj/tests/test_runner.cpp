#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <sys/wait.h>

#include "exchmat/runner.hpp"

using namespace exchmat;
namespace fs = std::filesystem;

namespace {

ExperimentConfig from_text(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("exchmat_test_runner_" + name);
    fs::remove_all(p);
    return p;
}

std::string small_circular(const fs::path& out) {
    return "experiment = circular-law\nn = 12, 20\ntrials = 3\nmaster_seed = 9\noutput_dir = " + out.string() + "\n";
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(EXCHMAT_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

} // namespace

TEST(Config, ParsesListsAndComments) {
    const auto c = from_text("# header\nexperiment = log-potential   # trailing\nn = 10, 20\n\nz = 0, 0.5, -1+2i, 3i, 1e-1-2.5e0i, -i\n"
                             "trials = 4\nmaster_seed = 0x10\noutput_dir = out\n");
    EXPECT_EQ(c.experiment, Experiment::log_potential);
    EXPECT_EQ(c.n, (std::vector<std::size_t>{10, 20}));
    ASSERT_EQ(c.z.size(), 6u);
    EXPECT_EQ(c.z[1], cplx(0.5, 0.0));
    EXPECT_EQ(c.z[2], cplx(-1.0, 2.0));
    EXPECT_EQ(c.z[3], cplx(0.0, 3.0));
    EXPECT_EQ(c.z[4], cplx(0.1, -2.5));
    EXPECT_EQ(c.z[5], cplx(0.0, -1.0));
    EXPECT_EQ(c.trials, 4u);
    EXPECT_EQ(c.master_seed, 16u);
}

TEST(Config, RejectsUnknownAndMisplacedKeys) {
    const std::string base = "experiment = circular-law\nn = 10\nmaster_seed = 1\noutput_dir = o\n";
    try {
        from_text(base + "epsilons = 0.1\n");
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("unknown key 'epsilons'"), std::string::npos) << e.what();
    }
    EXPECT_THROW(from_text(base + "colour = red\n"), ValidationError);
    EXPECT_THROW(from_text(base + "density = 0.5\n"), ValidationError);  // not a sparse seed
    EXPECT_THROW(from_text(base + "n = 12\n"), ValidationError);        // duplicate
    EXPECT_THROW(from_text(base + "trials\n"), ValidationError);        // no '='
}

TEST(Config, FieldLevelMessages) {
    auto message = [](const std::string& text) {
        try {
            from_text(text);
        } catch (const ValidationError& e) {
            return std::string(e.what());
        }
        return std::string("no error");
    };
    const std::string head = "master_seed = 1\noutput_dir = o\n";
    EXPECT_NE(message(head + "experiment = circular-law\nn = 1\n").find("key 'n'"), std::string::npos);
    EXPECT_NE(message(head + "experiment = circular-law\nn = 4\ntrials = x\n").find("key 'trials'"), std::string::npos);
    EXPECT_NE(message(head + "experiment = log-potential\nn = 4\nz = 1+\n").find("key 'z'"), std::string::npos);
    EXPECT_NE(message(head + "experiment = ssv\nn = 4\nepsilons = 0.2, 0.1\n").find("key 'epsilons'"), std::string::npos);
    EXPECT_NE(message(head + "experiment = ssv\nn = 4\nz = 0, 1\nepsilons = 0.1\n").find("key 'z'"), std::string::npos);
    EXPECT_NE(message(head + "experiment = moments-oracle\nn = 4\n").find("key 'n'"), std::string::npos);
    EXPECT_NE(message(head + "experiment = concentration\nn = 4\ntrials = 10\n").find("key 'trials'"), std::string::npos);
    EXPECT_NE(message(head + "experiment = circular-law\nn = 4\nseed_kind = sparse\n").find("key 'density'"),
              std::string::npos);
    EXPECT_NE(message(head + "experiment = spiral\nn = 4\n").find("key 'experiment'"), std::string::npos);
    EXPECT_NE(message("experiment = circular-law\nn = 4\noutput_dir = o\n").find("key 'master_seed'"), std::string::npos);
}

TEST(Config, SeedFileIsResolvedRelativeToConfig) {
    const fs::path dir = scratch("seedfile");
    fs::create_directories(dir);
    std::ofstream(dir / "seed.txt") << "2\n1 -1\n-1 1\n";
    std::ofstream(dir / "run.cfg") << "experiment = moments-oracle\nseed_kind = file\nseed_file = seed.txt\nmaster_seed = 3\n"
                                      "output_dir = out\n";
    const auto c = load_config(dir / "run.cfg");
    EXPECT_EQ(c.n, (std::vector<std::size_t>{2}));
    EXPECT_TRUE(std::holds_alternative<FromEntriesKind>(c.seed_kind));
}

TEST(Report, HeaderOnlyCsvAndFormatting) {
    CsvTable empty{"e.csv", {"a", "b"}, {}};
    EXPECT_EQ(format_csv(empty), "a,b\n");
    CsvTable t{"t.csv", {"i", "x", "s"}, {{std::int64_t{3}, 0.1, std::string("ok")}}};
    EXPECT_EQ(format_csv(t), "i,x,s\n3,0.10000000000000001,ok\n");
    CsvTable bad{"b.csv", {"i"}, {{std::int64_t{1}, 2.0}}};
    EXPECT_THROW(format_csv(bad), Error);
}

TEST(Report, ValidatorAcceptsRoundTripAndRejectsDamage) {
    const fs::path out = scratch("validator");
    const auto c = from_text(small_circular(out));
    const auto report = run_experiment(c);
    const json s = summary_json(report);
    const json back = json::parse(s.dump(2));
    EXPECT_NO_THROW(validate_summary(back));
    json broken = back;
    broken["schema_version"] = 99;
    EXPECT_THROW(validate_summary(broken), ValidationError);
    broken = back;
    broken.erase("results");
    EXPECT_THROW(validate_summary(broken), ValidationError);
    broken = back;
    broken["config"]["n"] = 5;
    EXPECT_THROW(validate_summary(broken), ValidationError);
}

TEST(Run, CircularLawShapeContract) {
    const fs::path out = scratch("shape");
    const auto c = from_text("experiment = circular-law\nn = 100\ntrials = 1\nmaster_seed = 42\noutput_dir = " + out.string());
    const auto files = write_report(run_experiment(c), c.output_dir);
    EXPECT_EQ(files.size(), 3u);
    std::ifstream in(out / "eigenvalues_n100.csv");
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "trial,index,re,im");
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    EXPECT_EQ(rows, 100);
    const json s = json::parse(slurp(out / "summary.json"));
    EXPECT_NO_THROW(validate_summary(s));
    EXPECT_EQ(s["config"]["master_seed"], "42");
    EXPECT_EQ(s["results"]["per_n"][0]["n"], 100);
    for (const auto& e : fs::directory_iterator(out)) EXPECT_NE(e.path().extension(), ".tmp");
}

TEST(Run, MomentsOracleCrossCovariance) {
    const auto c = from_text("experiment = moments-oracle\nn = 2\nmaster_seed = 1\noutput_dir = unused\n");
    const auto r = run_experiment(c);
    EXPECT_NEAR(r.results["per_n"][0]["cross_covariance"].get<double>(), -1.0 / 3.0, 1e-12);
}

TEST(Run, ByteIdenticalReruns) {
    const fs::path a = scratch("det_a"), b = scratch("det_b");
    const std::string body = "experiment = ssv\nn = 12\nz = 0.5+0.5i\nepsilons = 0.1, 1\ntrials = 6\ndistance_k = 3\n"
                             "master_seed = 5\noutput_dir = same\n";
    auto c1 = from_text(body), c2 = from_text(body);
    const auto f1 = write_report(run_experiment(c1, 1), a);
    const auto f2 = write_report(run_experiment(c2, 3), b);
    ASSERT_EQ(f1.size(), f2.size());
    for (std::size_t i = 0; i < f1.size(); ++i) {
        EXPECT_EQ(f1[i].filename(), f2[i].filename());
        EXPECT_EQ(slurp(f1[i]), slurp(f2[i])) << f1[i];
    }
}

TEST(Run, MasterSeedOverrideChangesResultsAndEcho) {
    auto c = from_text(small_circular(scratch("override")));
    const auto r1 = run_experiment(c);
    c.set_master_seed(10);
    const auto r2 = run_experiment(c);
    EXPECT_EQ(r2.config_echo.at("master_seed"), "10");
    EXPECT_NE(r1.results.dump(), r2.results.dump());
}

TEST(Run, EachExperimentProducesValidSummary) {
    const std::vector<std::string> configs = {
        "experiment = quarter-circle\nn = 10\nz = 0, 1i\ntrials = 2\n",
        "experiment = log-potential\nn = 10\nz = 0, 2\ntrials = 2\n",
        "experiment = comb-clt\nn = 6, 10\ninstances = 2\ntrials = 200\nscores = balanced\n",
        "experiment = concentration\nfunctional = distance\nn = 8\nk = 3\ntrials = 1000\n",
        "experiment = concentration\nfunctional = submatrix_hs\nrows = 2\nn = 8\ntrials = 1000\nseed_kind = sparse\ndensity = 0.3\n",
        "experiment = circular-law\nn = 9\nseed_kind = gaussian\ntrials = 2\n",
    };
    for (const auto& text : configs) {
        const fs::path out = scratch("each");
        const auto c = from_text(text + "master_seed = 4\noutput_dir = " + out.string() + "\n");
        const auto r = run_experiment(c, 2);
        EXPECT_EQ(r.kernel_failures, 0u);
        const auto files = write_report(r, out);
        EXPECT_NO_THROW(validate_summary(json::parse(slurp(out / "summary.json")))) << text;
        for (const auto& f : files) EXPECT_TRUE(fs::exists(f));
    }
}

TEST(Cli, ExitCodes) {
    const fs::path dir = scratch("cli");
    fs::create_directories(dir);
    std::ofstream(dir / "good.cfg") << "experiment = moments-oracle\nn = 2\n";
    std::ofstream(dir / "bad.cfg") << "experiment = moments-oracle\nn = 2\nwhatever = 1\n";
    const std::string out = (dir / "out").string();
    EXPECT_EQ(run_cli("run --config " + (dir / "good.cfg").string() + " --rng-seed 3 --out " + out), 0);
    EXPECT_TRUE(fs::exists(dir / "out" / "summary.json"));
    EXPECT_EQ(run_cli("run --config " + (dir / "bad.cfg").string() + " --rng-seed 3 --out " + out), 2);
    EXPECT_EQ(run_cli("run --config " + (dir / "good.cfg").string()), 2);  // no seed, no output dir
    EXPECT_EQ(run_cli("run --config " + (dir / "good.cfg").string() + " --rng-seed nope --out " + out), 2);
    EXPECT_EQ(run_cli("run --config " + (dir / "missing.cfg").string() + " --rng-seed 1 --out " + out), 2);
    EXPECT_EQ(run_cli("selftest"), 0);
}
