// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "taskspace/dataset_io.hpp"
#include "taskspace/families.hpp"
#include "taskspace/file_util.hpp"

using namespace taskspace;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

Result run(const std::string& args) {
  const std::string cmd = "env -u TASKSPACE_STORE " + std::string(TASKSPACE_CLI_PATH) + " " + args + " 2>/dev/null";
  Result r;
  FILE* p = popen(cmd.c_str(), "r");
  std::array<char, 4096> buf{};
  while (std::size_t n = std::fread(buf.data(), 1, buf.size(), p)) r.out.append(buf.data(), n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string first_line(const std::string& s) { return s.substr(0, s.find('\n')); }

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("taskspace_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    write_text_atomic(dir_ / "cfg.json", json{{"surrogate", {{"config", {{"width", 8}, {"ff", 16}, {"layers", 1}}},
                                                              {"pretrain_epochs", 1}}},
                                              {"pool", {{"families", {"sentiment-lexicon", "majority-class"}}, {"cap", 10}}},
                                              {"extraction", {{"dte", {{"epochs", 1}}}, {"mte", {{"epochs", 1}}}}}}
                                                 .dump());
    for (const char* fam : {"sentiment-lexicon", "majority-class"}) {
      TaskFamily f;
      f.id = fam;
      f.n_train = 16;
      f.n_test = 0;
      write_labeled_jsonl(gen_family(f).train, dir_ / (std::string(fam) + ".jsonl"));
    }
    write_text_atomic(dir_ / "prompts.json", R"([{"id":"p1","tokens":[10,11]},{"id":"p2","tokens":[40]}])");
  }
  std::string base(const std::string& store = "store") const {
    return "--config " + (dir_ / "cfg.json").string() + " --store " + (dir_ / store).string();
  }
  std::string data(const char* fam) const { return (dir_ / (std::string(fam) + ".jsonl")).string(); }
  fs::path dir_;
};

}  // namespace

TEST_F(Cli, HelpListsEveryFlag) {
  const auto r = run("--help");
  EXPECT_EQ(r.code, 0);
  for (const char* flag : {"--config", "--store", "--runs", "--seed", "--method", "--jobs", "--oracle-cmd", "--oracle-url",
                           "--prompt-file", "--pool", "--data", "--name", "--target", "--candidates", "--ids", "--dims"})
    EXPECT_NE(r.out.find(flag), std::string::npos) << flag;
  for (const char* cmd : {"pretrain", "build", "dte", "mte", "rank", "select-prompt", "transfer", "prompt", "project",
                          "verify"})
    EXPECT_NE(r.out.find(cmd), std::string::npos) << cmd;
}

TEST_F(Cli, ConfigErrorsExitTwo) {
  write_text_atomic(dir_ / "typo.json", R"({"sed": 3})");
  EXPECT_EQ(run("--config " + (dir_ / "typo.json").string() + " --store " + (dir_ / "s").string() + " pool build").code, 2);
  EXPECT_FALSE(fs::exists(dir_ / "s" / "runs"));
  EXPECT_EQ(run(base() + " --method fisher pool build").code, 2);
  EXPECT_EQ(run("--config " + (dir_ / "cfg.json").string() + " pool build").code, 2);  // no store
  EXPECT_EQ(run(base() + " dte").code, 2);                                              // --data missing
  EXPECT_EQ(run(base() + " frobnicate").code, 2);
  EXPECT_EQ(run(base() + " pretrain").code, 0);
  EXPECT_EQ(run(base() + " dte --data " + (dir_ / "absent.jsonl").string()).code, 2);
}

TEST_F(Cli, PipelineEndToEnd) {
  ASSERT_EQ(run(base() + " --seed 4 pool build").code, 0);
  ASSERT_EQ(run(base() + " --seed 4 pretrain").code, 0);
  const auto d1 = run(base() + " dte --data " + data("sentiment-lexicon"));
  ASSERT_EQ(d1.code, 0);
  ASSERT_EQ(run(base() + " dte --data " + data("majority-class")).code, 0);
  const auto m = run(base() + " mte --oracle-cmd '" + std::string(ECHO_ORACLE_PATH) + " --kind class' --prompt-file " +
                     (dir_ / "prompts.json").string());
  ASSERT_EQ(m.code, 0);
  EXPECT_NE(m.out.find("echo#p1"), std::string::npos);

  const auto r = run(base() + " rank --target sentiment-lexicon");
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(first_line(r.out), "rank\tid\tsimilarity");
  EXPECT_NE(r.out.find("echo#p2"), std::string::npos);

  const auto sel = run(base() + " select-prompt --data " + data("majority-class") + " --oracle-cmd '" +
                       std::string(ECHO_ORACLE_PATH) + "' --prompt-file " + (dir_ / "prompts.json").string());
  ASSERT_EQ(sel.code, 0);
  EXPECT_TRUE(sel.out == "p1\n" || sel.out == "p2\n") << sel.out;

  const auto proj = run(base() + " project");
  ASSERT_EQ(proj.code, 0);
  EXPECT_EQ(first_line(proj.out), "id\tkind\tmethod\tsource\tpc1\tpc2");

  // Every run directory holds its resolved config; the --seed flag beat the file.
  std::size_t runs = 0;
  for (const auto& e : fs::directory_iterator(dir_ / "store" / "runs")) {
    ASSERT_TRUE(fs::exists(e.path() / "config.json")) << e.path();
    const auto j = json::parse(read_text(e.path() / "config.json"));
    EXPECT_EQ(j.at("config").at("pool").at("cap"), 10);
    if (j.at("command") == "pretrain") EXPECT_EQ(j.at("config").at("seed"), 4);
    ++runs;
  }
  EXPECT_EQ(runs, 8u);
}

TEST_F(Cli, RepeatedRunsGiveIdenticalEmbeddingFiles) {
  for (const char* store : {"s1", "s2"}) {
    ASSERT_EQ(run(base(store) + " pretrain").code, 0);
    ASSERT_EQ(run(base(store) + " dte --data " + data("sentiment-lexicon")).code, 0);
    ASSERT_EQ(run(base(store) + " --method tupate dte --data " + data("sentiment-lexicon")).code, 0);
  }
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(dir_ / "s1" / "emb")) {
    if (e.path().extension() != ".f32") continue;
    EXPECT_EQ(read_text(e.path()), read_text(dir_ / "s2" / "emb" / e.path().filename()));
    ++files;
  }
  EXPECT_EQ(files, 2u);
}

TEST_F(Cli, MixedSpacesExitFive) {
  ASSERT_EQ(run(base() + " pretrain").code, 0);
  const auto a = run(base() + " dte --data " + data("sentiment-lexicon"));
  const auto b = run(base() + " --method tupate dte --data " + data("sentiment-lexicon"));
  ASSERT_EQ(a.code, 0);
  ASSERT_EQ(b.code, 0);
  EXPECT_EQ(run(base() + " project --ids " + first_line(a.out) + " " + first_line(b.out)).code, 5);
  // A different surrogate cannot join a store that already holds embeddings.
  write_text_atomic(dir_ / "other.json", json{{"surrogate", {{"config", {{"width", 8}, {"ff", 16}, {"layers", 1}}},
                                                             {"init_seed", 2}, {"pretrain_epochs", 0}}},
                                              {"pool", {{"families", {"parity"}}, {"cap", 5}}}}
                                                 .dump());
  EXPECT_EQ(run("--config " + (dir_ / "other.json").string() + " --store " + (dir_ / "store").string() + " pretrain").code,
            5);
}

TEST_F(Cli, OracleFailuresExitFour) {
  ASSERT_EQ(run(base() + " pool build").code, 0);
  ASSERT_EQ(run(base() + " pretrain").code, 0);
  EXPECT_EQ(run(base() + " mte --oracle-cmd " + (dir_ / "no-such-oracle").string()).code, 4);
  EXPECT_EQ(run(base() + " mte --oracle-url http://127.0.0.1:9").code, 4);
}

TEST_F(Cli, VerifyPassesWithConformance) {
  const auto r = run(base() + " verify --oracle-cmd " + std::string(ECHO_ORACLE_PATH));
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(r.out.find("FAIL"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("conformance"), std::string::npos);
}
