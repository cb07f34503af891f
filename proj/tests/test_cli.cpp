#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "kgchain/cli.hpp"
#include "support/fixtures.hpp"

namespace kgchain::cli {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("kgchain_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string write(const std::string& name, const std::string& content) {
    auto p = dir_ / name;
    std::ofstream(p) << content;
    return p.string();
  }

  fs::path dir_;
};

TEST_F(Cli, IngestCountsTriples) {
  auto r = invoke({"ingest", testing::data_path("tiny/graph.tsv")});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "3 triples, 3 entities, 2 relations\n");

  r = invoke({"ingest", write("empty.tsv", "")});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "0 triples, 0 entities, 0 relations\n");

  r = invoke({"ingest", "--format", "jsonl", write("g.jsonl", "{\"s\":\"A\",\"r\":\"x\",\"o\":\"B\"}\n")});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "1 triples, 2 entities, 1 relations\n");
}

TEST_F(Cli, IngestReportsMalformedLine) {
  auto r = invoke({"ingest", write("bad.tsv", "A\tr\tB\nonly two\tfields\n")});
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("2"), std::string::npos) << r.err;
  EXPECT_TRUE(r.out.empty());
}

TEST_F(Cli, AskAnswersTwoHopQuestion) {
  auto trace_path = (dir_ / "t.json").string();
  auto r = invoke({"ask", "--config", testing::data_path("tiny/config.json"), "Where was the spouse of A born?",
                   "--trace", trace_path});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "1. C (support=2)\n");

  auto shown = invoke({"trace", trace_path});
  EXPECT_EQ(shown.code, 0);
  EXPECT_NE(shown.out.find("birthplace of B"), std::string::npos);
  EXPECT_NE(shown.out.find("B | born_in | C"), std::string::npos);
}

TEST_F(Cli, AskFallsBackToNeighborhood) {
  auto r = invoke({"ask", "--config", testing::data_path("tiny/config.json"), "What is the color of A?"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "1. B (support=2)\n2. C (support=2)\n");
}

TEST_F(Cli, AskWithoutAnswer) {
  auto tiny = testing::data_path("tiny/");
  auto cfg = write("c.json", "{\"graph\": \"" + tiny + "graph.tsv\", \"provider\": {\"kind\": \"mock-oracle\", \"oracle\": \"" +
                                 tiny + "oracle.json\"}, \"chain\": {\"code_module\": false}}");
  auto r = invoke({"ask", "--config", cfg, "What is the color of A?"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "(no answer)\n");
}

TEST_F(Cli, UnknownConfigKeyIsConfigError) {
  auto cfg = write("c.json", R"({"provider": {"kind": "mock-script"}, "chain": {"program_retry": 3}})");
  auto r = invoke({"ask", "--config", cfg, "Q?"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("chain.program_retry"), std::string::npos) << r.err;

  r = invoke({"ask", "--config", (dir_ / "missing.json").string(), "Q?"});
  EXPECT_EQ(r.code, 2);
}

TEST_F(Cli, UnreachableProviderIsProviderError) {
  auto cfg = write("c.json", "{\"graph\": \"" + testing::data_path("tiny/graph.tsv") +
                                 R"(", "provider": {"kind": "openai-compatible", "base_url": "http://127.0.0.1:1", "max_retries": 0, "backoff_ms": 1}})");
  auto r = invoke({"ask", "--config", cfg, "Who is the spouse of A?"});
  EXPECT_EQ(r.code, 3) << r.err;
  EXPECT_NE(r.err.find("transport"), std::string::npos);
}

TEST_F(Cli, EvalEnhancedReport) {
  auto r = invoke({"eval", "--config", testing::data_path("synthetic/config.oracle.json"), "--enhanced"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("| Synthetic | KDCM + Code Module | 100.00 | 100.00 | 100.00 |"), std::string::npos) << r.out;
}

TEST_F(Cli, EvalBothWritesCsvAndSidecars) {
  auto data = testing::data_path("synthetic/");
  auto cfg = write("c.json", "{\"graph\": \"" + data + "graph.tsv\", \"provider\": {\"kind\": \"mock-oracle\", \"oracle\": \"" +
                                 data + "adversarial.json\"}, \"eval\": {\"dataset\": \"" + data +
                                 "questions.jsonl\", \"dataset_name\": \"Synthetic\", \"parallelism\": 3, "
                                 "\"outcomes\": \"outcomes.jsonl\", \"trace_dir\": \"traces\"}}");
  auto report = (dir_ / "report.csv").string();
  auto r = invoke({"eval", "--config", cfg, "--both", "--format", "csv", "--out", report});
  ASSERT_EQ(r.code, 0) << r.err;

  std::ifstream in(report);
  std::stringstream text;
  text << in.rdbuf();
  auto rows = eval::parse_report(text.str(), eval::ReportFormat::csv);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].config, "KDCM");
  EXPECT_EQ(rows[1].config, "KDCM + Code Module");
  EXPECT_GT(rows[1].hit1, rows[0].hit1);
  EXPECT_GE(rows[1].hit3, rows[0].hit3);
  EXPECT_GE(rows[1].hit5, rows[0].hit5);

  std::ifstream sidecar(dir_ / "outcomes.jsonl");
  std::size_t lines = 0;
  for (std::string line; std::getline(sidecar, line); ++lines) {
    auto doc = nlohmann::json::parse(line);
    EXPECT_TRUE(doc.contains("id"));
  }
  EXPECT_EQ(lines, 60u);
  std::size_t traces = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir_ / "traces")) traces += e.is_regular_file();
  EXPECT_EQ(traces, 60u);
}

TEST_F(Cli, EvalFlagsAreExclusive) {
  auto cfg = testing::data_path("synthetic/config.oracle.json");
  EXPECT_EQ(invoke({"eval", "--config", cfg, "--baseline", "--enhanced"}).code, 1);
  EXPECT_EQ(invoke({"eval", "--config", cfg}).code, 1);
  EXPECT_EQ(invoke({"eval", "--config", cfg, "--both", "--format", "xml"}).code, 1);
  EXPECT_EQ(invoke({"frobnicate"}).code, 1);
  EXPECT_EQ(invoke({}).code, 1);
}

TEST_F(Cli, OutputIsByteIdenticalAcrossRuns) {
  auto cfg = testing::data_path("synthetic/config.adversarial.json");
  auto a = invoke({"eval", "--config", cfg, "--both", "--format", "json"});
  auto b = invoke({"eval", "--config", cfg, "--both", "--format", "json"});
  EXPECT_EQ(a.code, 0);
  EXPECT_EQ(a.out, b.out);
}

TEST_F(Cli, EvalExitsWithProviderErrorWhenEverythingFails) {
  auto data = testing::data_path("synthetic/");
  auto cfg = write("c.json", "{\"graph\": \"" + data + "graph.tsv\", \"provider\": {\"kind\": \"openai-compatible\", "
                                 "\"base_url\": \"http://127.0.0.1:1\", \"max_retries\": 0}, \"eval\": {\"dataset\": \"" +
                                 write("d.jsonl", "{\"id\":\"x\",\"question\":\"Q?\",\"answers\":[\"A\"]}\n") + "\"}}");
  auto r = invoke({"eval", "--config", cfg, "--enhanced"});
  EXPECT_EQ(r.code, 3) << r.err;
}

}  // namespace
}  // namespace kgchain::cli
