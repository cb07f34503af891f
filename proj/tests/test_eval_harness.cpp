#include <gtest/gtest.h>

#include <algorithm>
#include <nlohmann/json.hpp>
#include <sstream>

#include "kgchain/eval_harness.hpp"
#include "support/brute_force.hpp"
#include "support/fixtures.hpp"
#include "support/generators.hpp"

namespace kgchain::eval {
namespace {

std::vector<QaRecord> parse_dataset(const std::string& text) {
  std::istringstream in(text);
  return load_dataset(in);
}

std::size_t dataset_error_line(const std::string& text) {
  try {
    parse_dataset(text);
  } catch (const DatasetError& e) {
    return e.line;
  }
  return 0;
}

TEST(Dataset, LoadsRecords) {
  auto d = parse_dataset("{\"id\":\"x\",\"question\":\"Q?\",\"answers\":[\"A\",\"B\"]}\n\n{\"id\":\"y\",\"question\":\"R\",\"answers\":[\"C\"]}\n");
  ASSERT_EQ(d.size(), 2u);
  EXPECT_EQ(d[0], (QaRecord{"x", "Q?", {"A", "B"}}));
  EXPECT_TRUE(parse_dataset("").empty());
}

TEST(Dataset, ErrorsNameTheLine) {
  EXPECT_EQ(dataset_error_line("{\"id\":\"x\",\"question\":\"Q\",\"answers\":[\"A\"]}\nnot json\n"), 2u);
  EXPECT_EQ(dataset_error_line("{\"id\":\"x\",\"question\":\"Q\",\"answers\":[]}\n"), 1u);
  EXPECT_EQ(dataset_error_line("{\"id\":\"x\",\"question\":\"Q\"}\n"), 1u);
  EXPECT_EQ(dataset_error_line("{\"id\":\"x\",\"question\":\"Q\",\"answers\":[\"A\"]}\n"
                               "{\"id\":\"x\",\"question\":\"R\",\"answers\":[\"B\"]}\n"),
            2u);
}

TEST(HitAtK, Examples) {
  EXPECT_EQ(hit_at_k({"Paris", "Lyon"}, {"paris"}, 1), 1);
  EXPECT_EQ(hit_at_k({"Lyon", "Paris"}, {"Paris"}, 1), 0);
  EXPECT_EQ(hit_at_k({"Lyon", "Paris"}, {"Paris"}, 3), 1);
  EXPECT_EQ(hit_at_k({}, {"Paris"}, 5), 0);
  EXPECT_EQ(hit_at_k({"  New   York "}, {"new york"}, 1), 1);
  EXPECT_THROW(hit_at_k({"a"}, {"a"}, 0), std::invalid_argument);
}

TEST(HitAtK, MatchesBruteForceAndIsMonotone) {
  testing::Rng rng(17);
  const std::vector<std::string> vocab = {"Paris", "paris", " PARIS", "Lyon", "New York", "new  york", "Nice", "x"};
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<std::string> preds, gold;
    for (std::size_t i = rng() % 7; i > 0; --i) preds.push_back(vocab[rng() % vocab.size()]);
    for (std::size_t i = 1 + rng() % 3; i > 0; --i) gold.push_back(vocab[rng() % vocab.size()]);
    int prev = 0;
    for (std::size_t k = 1; k <= 8; ++k) {
      int h = hit_at_k(preds, gold, k);
      ASSERT_EQ(h, testing::brute_hit_at_k(preds, gold, k));
      ASSERT_GE(h, prev);
      prev = h;
    }
  }
}

TEST(Percent, ArithmeticIsExact) {
  EXPECT_EQ(Percent::from_ratio(1, 3).str(), "33.33");
  EXPECT_EQ(Percent::from_ratio(2, 3).str(), "66.67");
  EXPECT_EQ(Percent::from_ratio(1, 8).str(), "12.50");
  EXPECT_EQ(Percent::from_ratio(1, 800).str(), "0.13");  // 0.125 rounds up
  EXPECT_EQ(Percent::from_ratio(30, 30).str(), "100.00");
  EXPECT_EQ(Percent::parse("97.5").hundredths(), 9750);
  EXPECT_EQ(Percent::parse("5").str(), "5.00");
  EXPECT_THROW(Percent::parse("1.234"), std::invalid_argument);
  EXPECT_THROW(Percent::parse("-1"), std::invalid_argument);
  EXPECT_THROW(Percent::from_ratio(0, 0), std::invalid_argument);
}

std::vector<MetricsReport> five_rows() {
  std::vector<MetricsReport> rows;
  const char* names[] = {"D1", "D2", "D3", "D4", "D5"};
  const char* h1[] = {"99.33", "97.86", "98.23", "98.19", "94.10"};
  for (int i = 0; i < 5; ++i) {
    rows.push_back({names[i], "KDCM + Code Module", Percent::parse(h1[i]), Percent::parse("99.00"),
                    Percent::parse("99.50"), 10, 0});
  }
  return rows;
}

TEST(Report, AverageRow) {
  auto avgs = average_rows(five_rows());
  ASSERT_EQ(avgs.size(), 1u);
  EXPECT_EQ(avgs[0].hit1.str(), "97.54");
  EXPECT_EQ(avgs[0].dataset, "Average");
  EXPECT_EQ(avgs[0].records, 50u);

  auto single = five_rows();
  single.resize(1);
  EXPECT_TRUE(average_rows(single).empty());
}

TEST(Report, MarkdownLayout) {
  auto text = emit_report(five_rows(), ReportFormat::markdown);
  EXPECT_EQ(text.rfind("| Dataset | Model | HIT@1 | HIT@3 | HIT@5 |\n", 0), 0u);
  EXPECT_NE(text.find("| D1 | KDCM + Code Module | 99.33 | 99.00 | 99.50 |\n"), std::string::npos);
  EXPECT_NE(text.find("| Average | KDCM + Code Module | 97.54 | 99.00 | 99.50 |\n"), std::string::npos);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 8);
}

TEST(Report, CsvAndJsonRoundTrip) {
  auto rows = five_rows();
  rows[2].config = "KDCM, quoted \"name\"";
  for (auto fmt : {ReportFormat::csv, ReportFormat::json}) {
    auto text = emit_report(rows, fmt);
    EXPECT_EQ(parse_report(text, fmt), rows);
  }
  auto csv = emit_report(five_rows(), ReportFormat::csv);
  EXPECT_EQ(csv.rfind("row,dataset,config,hit@1,hit@3,hit@5,records,failed\n", 0), 0u);
  EXPECT_NE(csv.find("average,Average,KDCM + Code Module,97.54,"), std::string::npos);
  auto doc = nlohmann::json::parse(emit_report(five_rows(), ReportFormat::json));
  EXPECT_DOUBLE_EQ(doc["averages"][0]["hit@1"].get<double>(), 97.54);
  EXPECT_EQ(parse_report_format("markdown"), ReportFormat::markdown);
  EXPECT_THROW(parse_report_format("xml"), std::invalid_argument);
}

TEST(RunEval, OracleScoresPerfectly) {
  auto g = testing::synthetic_graph();
  auto data = testing::dataset("synthetic/questions.jsonl");
  ASSERT_EQ(data.size(), 30u);
  EvalOptions opts;
  opts.dataset_name = "Synthetic";
  opts.parallelism = 4;
  auto run = run_eval(*testing::table_provider("synthetic/oracle.json"), g, data, ChainConfig{}, opts);
  EXPECT_EQ(run.report.hit1.str(), "100.00");
  EXPECT_EQ(run.report.hit3.str(), "100.00");
  EXPECT_EQ(run.report.hit5.str(), "100.00");
  EXPECT_EQ(run.report.failed, 0u);
  EXPECT_EQ(run.report.config, "KDCM + Code Module");
  EXPECT_TRUE(std::is_sorted(run.outcomes.begin(), run.outcomes.end(),
                             [](const auto& a, const auto& b) { return a.record_id < b.record_id; }));
}

TEST(RunEval, CodeModuleBeatsBaselineOnAdversarialTable) {
  auto g = testing::synthetic_graph();
  auto data = testing::dataset("synthetic/questions.jsonl");
  auto provider = testing::table_provider("synthetic/adversarial.json");
  ChainConfig baseline;
  baseline.code_module = false;
  baseline.grounding = false;
  auto base = run_eval(*provider, g, data, baseline);
  auto enhanced = run_eval(*provider, g, data, ChainConfig{});
  EXPECT_LT(base.report.hit1, enhanced.report.hit1);
  EXPECT_EQ(enhanced.report.hit1.str(), "100.00");
}

TEST(RunEval, CompletionOrderDoesNotMatter) {
  auto g = testing::synthetic_graph();
  auto data = testing::dataset("synthetic/questions.jsonl");
  auto provider = testing::table_provider("synthetic/adversarial.json");
  ChainConfig baseline;
  baseline.code_module = false;
  EvalOptions serial;
  auto one = run_eval(*provider, g, data, baseline, serial);
  auto shuffled = data;
  testing::Rng rng(1);
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  EvalOptions parallel;
  parallel.parallelism = 8;
  auto many = run_eval(*provider, g, shuffled, baseline, parallel);
  EXPECT_EQ(one.report, many.report);
  ASSERT_EQ(one.outcomes.size(), many.outcomes.size());
  for (std::size_t i = 0; i < one.outcomes.size(); ++i) {
    EXPECT_EQ(outcome_to_json(one.outcomes[i]), outcome_to_json(many.outcomes[i]));
  }
}

TEST(RunEval, ProviderErrorsAreRecordedNotThrown) {
  llm::FunctionProvider broken([](const llm::CompletionRequest&) -> std::string {
    throw llm::LlmError(llm::ErrorKind::transport, 3, "down");
  });
  auto data = testing::dataset("synthetic/questions.jsonl");
  data.resize(3);
  auto run = run_eval(broken, testing::synthetic_graph(), data, ChainConfig{});
  EXPECT_EQ(run.report.failed, 3u);
  EXPECT_EQ(run.report.hit1.str(), "0.00");
  for (const auto& o : run.outcomes) {
    EXPECT_TRUE(o.provider_error);
    EXPECT_NE(o.error.find("down"), std::string::npos);
  }
}

TEST(RunEval, EmptyDatasetThrows) {
  EXPECT_THROW(run_eval(*testing::table_provider("synthetic/oracle.json"), testing::synthetic_graph(), {}, ChainConfig{}),
               std::invalid_argument);
}

}  // namespace
}  // namespace kgchain::eval
