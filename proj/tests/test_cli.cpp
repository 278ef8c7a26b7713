#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "fdepi/csv.hpp"
#include "fdepi/error.hpp"
#include "fdepi/pipeline.hpp"

namespace fs = std::filesystem;
using namespace fdepi;

namespace {

struct Result {
    int code;
    std::string out, err;
};

Result run_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "fdepi");
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("fdepi_cli_" + name);
    fs::remove_all(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST(Config, ParsesKeyValueLinesWithComments) {
    const auto kv = parse_config_text("# header\n\nseed = 7   # trailing\n  k=3\n", "cfg");
    ASSERT_EQ(kv.size(), 2u);
    EXPECT_EQ(kv[0], std::make_pair(std::string("seed"), std::string("7")));
    EXPECT_EQ(kv[1], std::make_pair(std::string("k"), std::string("3")));
}

TEST(Config, MalformedLineNamesSourceAndLine) {
    try {
        parse_config_text("seed = 1\njust words\n", "my.cfg");
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("my.cfg line 2"), std::string::npos);
    }
}

TEST(Config, BadValuesNameTheKey) {
    PipelineConfig c;
    for (const auto& [key, value] : std::vector<std::pair<std::string, std::string>>{
             {"k", "two"}, {"alpha", "x"}, {"seed", "-3"}, {"lambda_grid", "1,,b"}, {"derivative_distance", "yes"}}) {
        try {
            c.set(key, value);
            FAIL() << key;
        } catch (const ValidationError& e) {
            EXPECT_NE(std::string(e.what()).find("'" + key + "'"), std::string::npos) << e.what();
        }
    }
    EXPECT_THROW(c.set("colour", "red"), ValidationError);
}

TEST(Config, CanonicalTextRoundTrips) {
    PipelineConfig a;
    a.use_fixture_directory(FDEPI_FIXTURE_DIR);
    a.seed = 18446744073709551615ULL;
    a.lambda_grid = {0.5, 100};
    a.alpha = 0.25;
    PipelineConfig b;
    for (const auto& [k, v] : parse_config_text(a.canonical_text(), "canonical")) b.set(k, v);
    EXPECT_EQ(a.canonical_text(), b.canonical_text());
    EXPECT_EQ(config_hash(a), config_hash(b));
    b.set("alpha", "0.3");
    EXPECT_NE(config_hash(a), config_hash(b));
    // output directory is not part of the hash
    b = a;
    b.output_dir = "elsewhere";
    EXPECT_EQ(config_hash(a), config_hash(b));
}

TEST(Cli, MissingSeedIsValidationError) {
    const auto r = run_cli({"ingest", "-o", scratch("noseed").string()});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("seed"), std::string::npos);
}

TEST(Cli, MissingInputFileNamesThePath) {
    const auto r = run_cli({"ingest", "--seed", "1", "--istat", "/no/such/istat.csv", "-o", scratch("missing").string()});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("/no/such/istat.csv"), std::string::npos);
}

TEST(Cli, UnknownFlagAndBadThreadsAreUsageErrors) {
    EXPECT_EQ(run_cli({"ingest", "--seed", "1", "--colour", "red"}).code, 1);
    EXPECT_EQ(run_cli({"ingest", "--seed", "1", "--threads", "0", "-o", scratch("t0").string()}).code, 1);
    ::setenv("FDEPI_THREADS", "many", 1);
    const auto r = run_cli({"ingest", "--seed", "1", "-o", scratch("envbad").string()});
    ::unsetenv("FDEPI_THREADS");
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("FDEPI_THREADS"), std::string::npos);
}

TEST(Cli, NumericalFailureNamesModuleAndOperation) {
    // lambda = 0 interpolates, so GCV is undefined for every candidate
    const auto r = run_cli({"smooth", "--seed", "1", "--lambda-grid", "0", "-o", scratch("num").string()});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("fd-core"), std::string::npos);
    EXPECT_NE(r.err.find("select_lambda"), std::string::npos);
}

TEST(Cli, FlagsOverrideConfigFile) {
    const auto dir = scratch("override");
    fs::create_directories(dir);
    {
        std::ofstream cfg(dir / "run.cfg");
        cfg << "seed = 5\nrestarts = 3\nk = 3\n";
    }
    const auto r = run_cli({"motifs", "--config", (dir / "run.cfg").string(), "--k", "2", "-o", (dir / "out").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto manifest = slurp(dir / "out" / "run_manifest.txt");
    EXPECT_NE(manifest.find("\nk = 2\n"), std::string::npos);
    EXPECT_NE(manifest.find("\nrestarts = 3\n"), std::string::npos);
    EXPECT_NE(manifest.find("\nseed = 5\n"), std::string::npos);
}

TEST(Cli, ManifestRecordsRunAndReproducesIt) {
    const auto dir = scratch("manifest");
    auto r = run_cli({"motifs", "--seed", "11", "--restarts", "4", "-o", (dir / "a").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto manifest = slurp(dir / "a" / "run_manifest.txt");
    EXPECT_NE(manifest.find("# config_hash: "), std::string::npos);
    EXPECT_NE(manifest.find("# seed: 11"), std::string::npos);
    EXPECT_NE(manifest.find("# step motifs wall_seconds "), std::string::npos);

    r = run_cli({"motifs", "--config", (dir / "a" / "run_manifest.txt").string(), "-o", (dir / "b").string(),
                 "--threads", "3"});
    ASSERT_EQ(r.code, 0) << r.err;
    for (const char* f : {"memberships.csv", "shifts.csv", "motifs.csv", "objective_trace.csv"})
        EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
}

TEST(Cli, NoTemporaryFilesLeftBehind) {
    const auto dir = scratch("atomic");
    ASSERT_EQ(run_cli({"ingest", "--seed", "1", "-o", dir.string()}).code, 0);
    std::size_t files = 0;
    for (const auto& e : fs::directory_iterator(dir)) {
        ++files;
        const auto name = e.path().filename().string();
        EXPECT_EQ(name.find(".tmp"), std::string::npos) << name;
    }
    EXPECT_GT(files, 5u);
}

// Synthetic fixture: the bundled data were built to show the two groups.
TEST(Cli, MotifsOnFixtureGiveTheTwoGroups) {
    const auto dir = scratch("groups");
    ASSERT_EQ(run_cli({"motifs", "--k", "2", "--length", "65", "--seed", "7", "-o", dir.string()}).code, 0);
    const auto table = read_csv(dir / "memberships.csv");
    const auto label = table.column("hard_label");
    std::vector<std::string> group1;
    for (const auto& row : table.rows)
        if (row[label] == "1") group1.push_back(row[0]);
    const std::vector<std::string> expected{"Emilia Romagna", "Liguria",        "Lombardia",    "Marche",
                                            "Piemonte",       "Trento/Bolzano", "Valle d'Aosta"};
    EXPECT_EQ(group1, expected);
    EXPECT_EQ(table.header.size(), 4u);  // region, p_1, p_2, hard_label
}

TEST(Cli, ThreadCountDoesNotChangeOutputs) {
    const auto dir = scratch("threads");
    for (const char* t : {"1", "4"}) {
        const auto r = run_cli({"iwt", "--seed", "3", "--threads", t, "-o", (dir / t).string()});
        ASSERT_EQ(r.code, 0) << r.err;
    }
    EXPECT_EQ(slurp(dir / "1" / "iwt_adjusted.csv"), slurp(dir / "4" / "iwt_adjusted.csv"));
}
