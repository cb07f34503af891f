#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include "kgchain/chain_executor.hpp"
#include "kgchain/grounding.hpp"
#include "support/fixtures.hpp"
#include "support/generators.hpp"

namespace kgchain {
namespace {

using testing::tiny_graph;

llm::ProviderHandle tiny_oracle() {
  return llm::make_provider(llm::make_oracle_provider(llm::load_oracle_table(testing::data_path("tiny/oracle.json"))));
}

SubProblemPlan two_hop_plan() {
  SubProblemPlan plan;
  plan.origin_question = "Where was the spouse of A born?";
  plan.subproblems = {{"s1", "spouse of A", {}, ExpectedKind::entity_set},
                      {"s2", "birthplace of {s1}", {"s1"}, ExpectedKind::entity_set}};
  return plan;
}

TEST(RunChain, TwoHopWithCodeModule) {
  auto g = tiny_graph();
  auto trace = run_chain(*tiny_oracle(), g, two_hop_plan(), ChainConfig{});
  ASSERT_EQ(trace.steps.size(), 2u);
  EXPECT_EQ(trace.steps[0].status, StepStatus::ok);
  EXPECT_EQ(trace.steps[1].status, StepStatus::ok);
  EXPECT_EQ(trace.steps[1].question, "birthplace of B");
  EXPECT_EQ(trace.final_answers, (std::vector<RankedAnswer>{{EntityId("C"), 2}}));
  EXPECT_EQ(trace.total_evidence, (TripleSet{make_triple("A", "spouse", "B"), make_triple("B", "born_in", "C")}));
  EXPECT_EQ(trace.steps[0].claims, std::vector<Triple>{make_triple("A", "spouse", "B")});
  EXPECT_TRUE(trace.steps[1].ungrounded.empty());
}

TEST(RunChain, BaselineAnswersWithoutEvidence) {
  auto provider = llm::make_provider(
      llm::make_scripted_provider({{"Sub-question: spouse of A", "ANSWER: B"}, {"Sub-question: birthplace of B", "ANSWER: C"}}, ""));
  ChainConfig cfg;
  cfg.code_module = false;
  cfg.grounding = false;
  auto trace = run_chain(*provider, tiny_graph(), two_hop_plan(), cfg);
  EXPECT_EQ(trace.final_answers, (std::vector<RankedAnswer>{{EntityId("C"), 0}}));
  EXPECT_TRUE(trace.total_evidence.empty());
  for (const auto& s : trace.steps) {
    EXPECT_EQ(s.status, StepStatus::plain_answer);
    EXPECT_FALSE(s.program.has_value());
    EXPECT_EQ(s.prompt.find("kgql"), std::string::npos);
  }
}

TEST(RunChain, BaselineWithoutAnswerFails) {
  auto provider = llm::make_provider(llm::make_scripted_provider({}, "no idea"));
  ChainConfig cfg;
  cfg.code_module = false;
  auto trace = run_chain(*provider, tiny_graph(), two_hop_plan(), cfg);
  EXPECT_EQ(trace.steps[0].status, StepStatus::failed);
  EXPECT_TRUE(trace.final_answers.empty());
}

TEST(RunChain, ProgramRetryThenSuccess) {
  int calls = 0;
  llm::FunctionProvider provider([&](const llm::CompletionRequest&) -> std::string {
    if (++calls == 1) return "```kgql\nSTART(\"A\"); FOLLOW(\"color\"); RETURN;\n```";
    return "```kgql\nSTART(\"A\"); FOLLOW(\"spouse\"); RETURN;\n```\nANSWER: B";
  });
  auto trace = run_chain(provider, tiny_graph(), fallback_plan("spouse of A"), ChainConfig{});
  const auto& s = trace.steps.at(0);
  EXPECT_EQ(s.status, StepStatus::program_retried);
  EXPECT_EQ(s.program_retries, 1);
  ASSERT_EQ(s.program_errors.size(), 1u);
  EXPECT_NE(s.program_errors[0].find("color"), std::string::npos);
  EXPECT_NE(s.exchanges.at(1).prompt.find("Your previous reply was rejected"), std::string::npos);
  EXPECT_EQ(trace.final_answers.at(0).entity, EntityId("B"));
}

TEST(RunChain, ExhaustedRetriesFallBackToRetrieval) {
  int calls = 0;
  llm::FunctionProvider provider([&](const llm::CompletionRequest& r) -> std::string {
    ++calls;
    if (r.messages.back().content.find("```kgql") != std::string::npos) return "START(oops";
    return "ANSWER: B";
  });
  auto trace = run_chain(provider, tiny_graph(), fallback_plan("Who is the spouse of A?"), ChainConfig{});
  const auto& s = trace.steps.at(0);
  EXPECT_EQ(s.status, StepStatus::fallback_retrieval);
  EXPECT_EQ(s.program_errors.size(), 4u);
  EXPECT_EQ(calls, 5);
  EXPECT_FALSE(s.program.has_value());
  EXPECT_EQ(s.resolved_answer, std::vector<EntityId>{EntityId("B")});
  EXPECT_TRUE(s.evidence.contains(make_triple("A", "spouse", "B")));
  EXPECT_NE(s.exchanges.back().prompt.find("A | spouse | B"), std::string::npos);
}

TEST(RunChain, UngroundedClaimsAreRetriedThenStripped) {
  llm::FunctionProvider provider([](const llm::CompletionRequest&) -> std::string {
    return "ANSWER: D\nCLAIM: A | spouse | D";
  });
  ChainConfig cfg;
  cfg.code_module = false;
  auto trace = run_chain(provider, tiny_graph(), fallback_plan("Who is the spouse of A?"), cfg);
  const auto& s = trace.steps.at(0);
  EXPECT_EQ(s.validation_retries, 2);
  EXPECT_EQ(s.exchanges.size(), 3u);
  EXPECT_NE(s.exchanges[1].prompt.find("These claims are not supported by the knowledge graph:\nCLAIM: A | spouse | D"),
            std::string::npos);
  EXPECT_EQ(s.ungrounded, std::vector<Triple>{make_triple("A", "spouse", "D")});
  EXPECT_TRUE(s.claims.empty());
  EXPECT_TRUE(s.resolved_answer.empty());
  EXPECT_EQ(s.status, StepStatus::failed);
}

TEST(RunChain, CorrectedClaimsAfterRetryAreAccepted) {
  int calls = 0;
  llm::FunctionProvider provider([&](const llm::CompletionRequest&) -> std::string {
    return ++calls == 1 ? "ANSWER: B\nCLAIM: A | spouse | Q" : "ANSWER: B\nCLAIM: A | spouse | B";
  });
  ChainConfig cfg;
  cfg.code_module = false;
  auto trace = run_chain(provider, tiny_graph(), fallback_plan("Who is the spouse of A?"), cfg);
  const auto& s = trace.steps.at(0);
  EXPECT_EQ(s.validation_retries, 1);
  EXPECT_EQ(s.claims, std::vector<Triple>{make_triple("A", "spouse", "B")});
  EXPECT_EQ(s.ungrounded, std::vector<Triple>{make_triple("A", "spouse", "Q")});
  EXPECT_EQ(s.resolved_answer, std::vector<EntityId>{EntityId("B")});
}

TEST(StepPrompt, CarriesDependencyAnswersAndEvidence) {
  SubProblem sp{"s2", "birthplace of {s1}", {"s1"}, ExpectedKind::entity_set};
  AnswerMap answers{{"s1", {EntityId("B")}}};
  TripleSet ev{make_triple("A", "spouse", "B")};
  auto rels = tiny_graph().relation_sample(kMaxRelationSample);
  auto p = render_step_prompt(sp, answers, ev, rels, ChainConfig{});
  EXPECT_NE(p.find("Sub-question: birthplace of B"), std::string::npos);
  EXPECT_NE(p.find("A | spouse | B"), std::string::npos);
  EXPECT_NE(p.find("```kgql"), std::string::npos);
  EXPECT_NE(p.find("born_in, spouse"), std::string::npos);

  SubProblem root{"s1", "spouse of A", {}, ExpectedKind::entity_set};
  EXPECT_NE(render_step_prompt(root, {}, {}, rels, ChainConfig{}).find("Known facts:\n(none)"), std::string::npos);

  ChainConfig baseline;
  baseline.code_module = false;
  auto plain = render_step_prompt(sp, answers, ev, rels, baseline);
  EXPECT_EQ(plain.find("kgql"), std::string::npos);
  EXPECT_EQ(plain.find("A | spouse | B"), std::string::npos);
  EXPECT_NE(plain.find("Sub-question: birthplace of B"), std::string::npos);
  EXPECT_NE(plain.find(grounding::protocol_instructions()), std::string::npos);
}

TEST(StepPrompt, PlaceholderJoinAndUnresolved) {
  SubProblem sp{"s2", "films of {s1} and {other}", {"s1"}, ExpectedKind::entity_set};
  EXPECT_EQ(substitute_placeholders(sp, {{"s1", {EntityId("X"), EntityId("Y")}}}), "films of X, Y and {other}");
  try {
    substitute_placeholders(sp, {});
    FAIL();
  } catch (const UnresolvedPlaceholder& e) {
    EXPECT_EQ(e.placeholder, "s1");
  }
}

TEST(ProgramBlock, Extraction) {
  EXPECT_EQ(extract_program_block("x\n```kgql\nSTART(\"A\");\nRETURN;\n```\ny"), "START(\"A\");\nRETURN;\n");
  EXPECT_FALSE(extract_program_block("```json\n{}\n```").has_value());
  EXPECT_FALSE(extract_program_block("```kgql\nunterminated").has_value());
}

TEST(SupportScore, ConnectedComponent) {
  TripleSet ev{make_triple("A", "spouse", "B"), make_triple("B", "born_in", "C"), make_triple("X", "r", "Y")};
  EXPECT_EQ(support_score(EntityId("C"), ev), 2u);
  EXPECT_EQ(support_score(EntityId("Y"), ev), 1u);
  EXPECT_EQ(support_score(EntityId("Z"), ev), 0u);
  EXPECT_EQ(support_score(EntityId("C"), {}), 0u);
}

TEST(RunChain, RankingPrefersSupportThenMention) {
  std::istringstream in("A\tr\tB\nA\tr\tC\nB\tq\tD\n");
  auto g = load_graph(in, GraphFormat::tsv);
  // B and C share the component {A-r-B, A-r-C, B-q-D}, so ties break on mention order.
  llm::FunctionProvider provider([](const llm::CompletionRequest&) -> std::string {
    return "```kgql\nSTART(\"A\"); FOLLOW(\"r\"); RETURN;\n```\nI think C, then B.";
  });
  auto trace = run_chain(provider, g, fallback_plan("r of A"), ChainConfig{});
  ASSERT_EQ(trace.final_answers.size(), 2u);
  EXPECT_EQ(trace.final_answers[0].entity, EntityId("C"));
  EXPECT_EQ(trace.final_answers[1].entity, EntityId("B"));
  EXPECT_EQ(trace.final_answers[0].support, 2u);
}

TEST(TraceJson, RoundTrip) {
  auto trace = run_chain(*tiny_oracle(), tiny_graph(), two_hop_plan(), ChainConfig{});
  auto doc = trace_to_json(trace);
  auto back = trace_from_json(doc);
  EXPECT_EQ(trace_to_json(back), doc);
  EXPECT_EQ(back.final_answers, trace.final_answers);
  EXPECT_EQ(back.steps.at(1).program->instructions(), trace.steps.at(1).program->instructions());
  EXPECT_NE(render_trace(back).find("s2"), std::string::npos);
}

/// Random replies, random graph, random plan shape: the executor must
/// always produce a well-formed trace.
void check_trace_invariants(const ChainTrace& trace, const KnowledgeGraph& g, const ChainConfig& cfg) {
  ASSERT_EQ(trace.steps.size(), trace.plan.subproblems.size());
  TripleSet all;
  for (const auto& s : trace.steps) {
    if (s.status == StepStatus::ok || s.status == StepStatus::program_retried) {
      ASSERT_TRUE(s.program.has_value());
      ASSERT_TRUE(dsl::validate(*s.program, g).ok());
      ASSERT_FALSE(s.execution->result.empty());
    }
    ASSERT_LE(s.program_retries, cfg.program_retries);
    ASSERT_LE(s.validation_retries, cfg.validation_retries);
    for (const auto& t : s.evidence) ASSERT_TRUE(g.contains(t));
    if (cfg.grounding) {
      for (const auto& c : s.claims) ASSERT_TRUE(g.contains(c));
    }
    for (const auto& c : s.ungrounded) ASSERT_FALSE(g.contains(c));
    all.insert(s.evidence.begin(), s.evidence.end());
  }
  ASSERT_EQ(all, trace.total_evidence);
  for (std::size_t i = 1; i < trace.final_answers.size(); ++i) {
    ASSERT_GE(trace.final_answers[i - 1].support, trace.final_answers[i].support);
  }
}

TEST(RunChainProperty, GroundedOutputAndDeterminismUnderFuzz) {
  testing::Rng rng(2024);
  std::istringstream in("A\tspouse\tB\nB\tborn_in\tC\nA\tborn_in\tC\n");
  auto g = load_graph(in, GraphFormat::tsv);
  for (int trial = 0; trial < 400; ++trial) {
    ChainConfig cfg;
    cfg.code_module = trial % 3 != 0;
    cfg.grounding = trial % 2 == 0;
    auto seed = rng();
    auto make = [seed] {
      auto local = std::make_shared<testing::Rng>(seed);
      return llm::FunctionProvider([local](const llm::CompletionRequest&) { return testing::random_reply(*local); });
    };
    auto plan = trial % 4 == 0 ? fallback_plan("Who is the spouse of A?") : two_hop_plan();
    ChainTrace a, b;
    ASSERT_NO_THROW(a = run_chain(make(), g, plan, cfg));
    check_trace_invariants(a, g, cfg);
    b = run_chain(make(), g, plan, cfg);
    ASSERT_EQ(trace_to_json(a), trace_to_json(b));
    ASSERT_EQ(trace_to_json(trace_from_json(trace_to_json(a))), trace_to_json(a));
  }
}

TEST(ChainConfigCheck, RejectsNegativeCounts) {
  ChainConfig c;
  c.program_retries = -1;
  EXPECT_THROW(c.check(), std::invalid_argument);
  EXPECT_EQ(ChainConfig{}.label(), "KDCM + Code Module");
}

}  // namespace
}  // namespace kgchain
