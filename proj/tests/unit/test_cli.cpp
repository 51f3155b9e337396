#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "apg/io.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

class CliTest : public ::testing::Test {
 protected:
  static fs::path dir() { return fs::path(APG_TEST_TMP); }

  static void SetUpTestSuite() {
    fs::create_directories(dir());
    apg::write_text_file(path("example.json"), apg::domain_to_json(apg::example_domain()));
  }

  static std::string path(const std::string& name) { return (dir() / name).string(); }

  static Result run(const std::string& args) {
    const std::string out_file = path("stdout.txt");
    const std::string cmd = std::string("APG_LOG=quiet ") + APG_CLI_PATH + " " + args +
                            " > " + out_file + " 2> " + path("stderr.txt");
    const int status = std::system(cmd.c_str());
    Result r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream in(out_file);
    std::stringstream ss;
    ss << in.rdbuf();
    r.out = ss.str();
    return r;
  }

  static void pipeline() {
    ASSERT_EQ(run("solve --domain " + path("example.json") + " --out " + path("policy.json")).code, 0);
    ASSERT_EQ(run("sample --domain " + path("example.json") + " --policy " + path("policy.json") +
                  " --coverage 1 --seed 3 --out " + path("tr.json"))
                  .code,
              0);
    ASSERT_EQ(run("build-apg --transitions " + path("tr.json") + " --policy " +
                  path("policy.json") + " --epsilon 1 --out " + path("apg.json") + " --dot " +
                  path("apg.dot"))
                  .code,
              0);
  }
};

}  // namespace

TEST_F(CliTest, PipelineProducesCertainEdges) {
  pipeline();
  const std::string dot = apg::read_text_file(path("apg.dot"));
  std::size_t edges = 0;
  for (auto pos = dot.find("->"); pos != std::string::npos; pos = dot.find("->", pos + 2)) {
    ++edges;
    EXPECT_EQ(dot.substr(dot.find("label=\"", pos) + 7, 5), "1.000");
  }
  EXPECT_GT(edges, 1u);
  EXPECT_TRUE(fs::exists(path("apg.json") + ".manifest.json"));
  EXPECT_TRUE(fs::exists(path("policy.json") + ".manifest.json"));

  ASSERT_EQ(run("export-dot --apg " + path("apg.json") + " --out " + path("again.dot")).code, 0);
  EXPECT_EQ(apg::read_text_file(path("again.dot")), dot);
}

TEST_F(CliTest, PredictAndExplain) {
  pipeline();
  const std::string common = " --apg " + path("apg.json") + " --policy " + path("policy.json");
  auto r = run("predict" + common + " --state 0000 --n 3");
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "a_1 1.000000\n");
  r = run("predict" + common + " --state 0000 --n 1");
  EXPECT_EQ(r.out, "a_3 1.000000\n");
  r = run("predict" + common + " --state 0000 --n 4");
  EXPECT_EQ(r.out, "terminated 1.000000\n");

  r = run("explain" + common + " --state 0011");
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("state 0011\n"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("(action a_1)"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("relevant features: none\n"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("summary: take a_1"), std::string::npos) << r.out;
}

TEST_F(CliTest, ExitCodes) {
  EXPECT_EQ(run("--help").code, 0);
  EXPECT_EQ(run("").code, 50);
  EXPECT_EQ(run("solve --domain " + path("example.json")).code, 50);  // missing --out

  apg::write_text_file(path("broken.json"), "{\n  \"m\": 4,\n  nope\n}");
  EXPECT_EQ(run("solve --domain " + path("broken.json") + " --out " + path("x.json")).code, 30);

  apg::write_text_file(path("future.json"), R"({"schema_version": 7, "m": 4})");
  EXPECT_EQ(run("solve --domain " + path("future.json") + " --out " + path("x.json")).code, 31);

  EXPECT_EQ(run("solve --domain " + path("missing.json") + " --out " + path("x.json")).code, 40);
}

TEST_F(CliTest, GenerateIsSeeded) {
  ASSERT_EQ(run("generate-domain --m 8 --rho 0.25 --seed 5 --out " + path("d1.json")).code, 0);
  ASSERT_EQ(run("generate-domain --m 8 --rho 0.25 --seed 5 --out " + path("d2.json")).code, 0);
  EXPECT_EQ(apg::read_text_file(path("d1.json")), apg::read_text_file(path("d2.json")));
}
