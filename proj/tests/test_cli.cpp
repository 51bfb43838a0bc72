#include "maskverify/cli.hpp"
#include "maskverify/maskverify.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>

using namespace maskverify;
namespace fs = std::filesystem;

namespace {

struct CmdResult {
    int code = -1;
    std::string out;
    std::string err;
};

CmdResult run(std::vector<std::string> args) {
    std::ostringstream out, err;
    CmdResult r;
    r.code = cli::run_command(args, out, err);
    r.out  = out.str();
    r.err  = err.str();
    return r;
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        const auto * info = ::testing::UnitTest::GetInstance()->current_test_info();
        root_ = fs::temp_directory_path() / (std::string("maskverify_cli_") + info->name());
        fs::remove_all(root_);
        fs::create_directories(root_);
    }
    void TearDown() override { fs::remove_all(root_); }

    std::string dir(const std::string & name) const { return (root_ / name).string(); }

    fs::path root_;
};

std::string sha_of(const fs::path & p) { return sha256_hex(read_text_file(p.string())); }

int shell(const std::string & cmd) {
    const int status = std::system((cmd + " >/dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_F(CliTest, GenerateWritesGridAndManifest) {
    const CmdResult r = run({"generate", "--prompt", "a photo of a red circle", "--seed", "3", "--out-dir", dir("g")});
    ASSERT_EQ(r.code, 0) << r.err;
    const TokenGrid g = grid_from_json(read_json_file(dir("g") + "/grid.json"));
    EXPECT_TRUE(g.complete());
    const json m = read_json_file(dir("g") + "/manifest.json");
    EXPECT_EQ(m.at("command"), "generate");
    EXPECT_EQ(m.at("tool"), "maskverify");
    EXPECT_EQ(m.at("seed"), 3);
    ASSERT_EQ(m.at("outputs").size(), 1u);
    EXPECT_EQ(m.at("outputs")[0].at("sha256"), sha_of(dir("g") + "/grid.json"));
    EXPECT_EQ(m.at("summary").at("prompt"), "a photo of a red circle");
}

TEST_F(CliTest, VerifyRuleScoresHalfOnWrongColor) {
    const TokenGrid g = scene_to_grid(Scene{8, 8, {{Shape::square, Color::red, 1, 1}}});
    write_text_file(dir("grid.json"), json(g).dump());
    const CmdResult r = run({"verify", "--grid", dir("grid.json"), "--prompt", "a photo of a blue square", "--strategy",
                       "rule", "--out-dir", dir("v")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(read_json_file(dir("v") + "/verdict.json").at("score").get<double>(), 0.5);
    EXPECT_NE(r.out.find("score 0.5"), std::string::npos);
}

TEST_F(CliTest, SelectIsReproducible) {
    const std::vector<std::string> base{"select", "--prompt", "a photo of two green crosses", "--n", "6", "--k", "2",
                                        "--steps", "10", "--seed", "4"};
    auto a = base, b = base;
    a.insert(a.end(), {"--out-dir", dir("a")});
    b.insert(b.end(), {"--out-dir", dir("b"), "--jobs", "3"});
    ASSERT_EQ(run(a).code, 0);
    ASSERT_EQ(run(b).code, 0);
    EXPECT_EQ(sha_of(dir("a") + "/selection.json"), sha_of(dir("b") + "/selection.json"));
    const json sel = read_json_file(dir("a") + "/selection.json");
    EXPECT_EQ(sel.at("ranked").size(), 2u);
    EXPECT_EQ(sel.at("candidates").size(), 6u);
}

TEST_F(CliTest, ExitCodes) {
    CmdResult r = run({"generate", "--prompt", "a photo of a purple blob", "--out-dir", dir("x")});
    EXPECT_EQ(r.code, 1);
    const json e = json::parse(r.err);
    EXPECT_EQ(e.at("error"), "UnparsablePrompt");

    EXPECT_EQ(run({"verify", "--prompt", "a photo of a red circle", "--out-dir", dir("x")}).code, 2);
    EXPECT_EQ(run({"frobnicate"}).code, 2);
    EXPECT_EQ(run({}).code, 2);
    EXPECT_EQ(run({"bench", "--strategy", "magic", "--out-dir", dir("x")}).code, 2);
    EXPECT_EQ(run({"generate", "--prompt", "a photo of a red circle", "--epsilon", "2", "--out-dir", dir("x")}).code, 2);
    EXPECT_EQ(run({"--version"}).code, 0);
}

TEST_F(CliTest, HelpOnEverySubcommand) {
    EXPECT_EQ(run({"--help"}).code, 0);
    for (const char * sub : {"generate", "verify", "select", "build-dpo", "cot-labels", "bench", "report"}) {
        const CmdResult r = run({sub, "--help"});
        EXPECT_EQ(r.code, 0) << sub;
        EXPECT_NE(r.out.find("--out-dir"), std::string::npos) << sub;
    }
}

TEST_F(CliTest, ConfigFileMergesAndFlagsWin) {
    write_text_file(dir("cfg.toml"), "[bench]\nper-category = 2\nstrategy = \"rule\"\nn = 3\nsteps = 8\nseed = 9\n");
    ASSERT_EQ(run({"bench", "--config", dir("cfg.toml"), "--n", "2", "--out-dir", dir("o")}).code, 0);
    const json rep = read_json_file(dir("o") + "/report.json");
    EXPECT_EQ(rep.at("config").at("strategy"), "rule");
    EXPECT_EQ(rep.at("config").at("n"), 2);
    EXPECT_EQ(rep.at("config").at("seed"), 9);
    EXPECT_EQ(rep.at("prompts").size(), 12u);

    write_text_file(dir("bad.toml"), "[bench]\nwidgets = 4\n");
    EXPECT_EQ(run({"bench", "--config", dir("bad.toml"), "--out-dir", dir("o2")}).code, 2);
}

TEST_F(CliTest, EnvironmentVariables) {
    ::setenv("MASKVERIFY_OUT_DIR", dir("env").c_str(), 1);
    ::setenv("MASKVERIFY_JOBS", "2", 1);
    const CmdResult r = run({"generate", "--prompt", "a photo of a red circle"});
    ::unsetenv("MASKVERIFY_OUT_DIR");
    ::unsetenv("MASKVERIFY_JOBS");
    ASSERT_EQ(r.code, 0) << r.err;
    const json m = read_json_file(dir("env") + "/manifest.json");
    EXPECT_EQ(m.at("jobs"), 2);
    EXPECT_EQ(run({"generate", "--prompt", "a photo of a red circle"}).code, 2);  // no out dir anywhere
}

TEST_F(CliTest, ManifestReplayReproducesOutputs) {
    const std::vector<std::vector<std::string>> commands{
        {"generate", "--prompt", "a photo of a circle colored red", "--seed", "5", "--steps", "12"},
        {"select", "--prompt", "a photo of a red circle left of a blue square", "--n", "5", "--strategy", "rule"},
        {"build-dpo", "--random-specs", "8", "--categories", "counting", "position", "--n-per-prompt", "4",
         "--steps", "8"},
        {"bench", "--counts", "colors=3", "position=2", "--n", "3", "--k", "1", "--steps", "8", "--format", "csv",
         "json", "svg"},
    };
    int i = 0;
    for (auto args : commands) {
        const std::string first = dir("first" + std::to_string(i)), again = dir("again" + std::to_string(i));
        args.insert(args.end(), {"--out-dir", first});
        ASSERT_EQ(run(args).code, 0) << args.front();
        const json m = read_json_file(first + "/manifest.json");
        const CmdResult r  = run(cli::replay_arguments(m, again));
        ASSERT_EQ(r.code, 0) << args.front() << ": " << r.err;
        const json m2 = read_json_file(again + "/manifest.json");
        EXPECT_EQ(m2.at("config"), m.at("config")) << args.front();
        ASSERT_EQ(m2.at("outputs").size(), m.at("outputs").size());
        for (std::size_t o = 0; o < m.at("outputs").size(); ++o) {
            EXPECT_EQ(m2.at("outputs")[o].at("sha256"), m.at("outputs")[o].at("sha256")) << args.front();
        }
        ++i;
    }
}

TEST_F(CliTest, DpoCotBenchReportFlow) {
    write_text_file(dir("prompts.txt"),
                    "a photo of two red circles\na photo of a blue square above a green cross\n\n"
                    "a photo of a circle colored yellow\n");
    ASSERT_EQ(run({"build-dpo", "--prompts", dir("prompts.txt"), "--n-per-prompt", "6", "--steps", "10", "--out-dir",
                   dir("dpo")})
                  .code,
              0);
    const auto pairs = pairs_from_jsonl(read_text_file(dir("dpo") + "/pairs.jsonl"));
    const json dm    = read_json_file(dir("dpo") + "/manifest.json");
    EXPECT_EQ(dm.at("summary").at("pairs").get<std::size_t>() + dm.at("summary").at("skipped").get<std::size_t>(), 3u);
    EXPECT_EQ(dm.at("inputs")[0].at("sha256"), sha_of(dir("prompts.txt")));

    ASSERT_EQ(run({"cot-labels", "--pairs", dir("dpo") + "/pairs.jsonl", "--out-dir", dir("cot")}).code, 0);
    const std::string labels = read_text_file(dir("cot") + "/cot_labels.jsonl");
    EXPECT_EQ(static_cast<std::size_t>(std::count(labels.begin(), labels.end(), '\n')), 2 * pairs.size());

    ASSERT_EQ(run({"bench", "--per-category", "2", "--strategy", "none", "--steps", "8", "--out-dir", dir("b1")}).code, 0);
    ASSERT_EQ(run({"bench", "--per-category", "2", "--strategy", "cot", "--n", "3", "--steps", "8", "--out-dir",
                   dir("b2")})
                  .code,
              0);
    EXPECT_TRUE(fs::exists(dir("b1") + "/report.csv"));
    EXPECT_FALSE(fs::exists(dir("b1") + "/report.svg"));
    ASSERT_EQ(run({"report", "--input", dir("b1") + "/report.json", dir("b2") + "/report.json", "--out-dir",
                   dir("rep")})
                  .code,
              0);
    EXPECT_TRUE(fs::exists(dir("rep") + "/comparison.svg"));
    const std::string csv = read_text_file(dir("rep") + "/comparison.csv");
    EXPECT_NE(csv.find("none"), std::string::npos);
    EXPECT_NE(csv.find("cot"), std::string::npos);
}

TEST_F(CliTest, BinaryExitCodes) {
    const std::string bin = MASKVERIFY_CLI;
    EXPECT_EQ(shell(bin + " --help"), 0);
    EXPECT_EQ(shell(bin + " generate --prompt 'a photo of a red circle' --out-dir " + dir("bin")), 0);
    EXPECT_TRUE(fs::exists(dir("bin") + "/grid.json"));
    EXPECT_EQ(shell(bin + " generate --prompt 'a photo of a blob' --out-dir " + dir("bin")), 1);
    EXPECT_EQ(shell(bin + " generate --bogus"), 2);
}
