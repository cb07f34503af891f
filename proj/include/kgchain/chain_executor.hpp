#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "kgchain/decomposer.hpp"
#include "kgchain/dsl.hpp"
#include "kgchain/kg_store.hpp"
#include "kgchain/llm_gateway.hpp"

namespace kgchain {

struct ChainConfig {
  int program_retries = 3;
  int validation_retries = 2;
  int fallback_hops = 1;
  bool code_module = true;  // off = plain distillation chain baseline
  bool grounding = true;

  void check() const;

  /// "KDCM + Code Module" or "KDCM".
  std::string label() const;
};

enum class StepStatus {
  ok,                  // first program attempt succeeded
  program_retried,     // program succeeded after `program_retries` retries
  fallback_retrieval,  // retries exhausted, answered from neighborhood retrieval
  plain_answer,        // code module off, answered in plain text
  failed,              // plain-text step resolved no answer
};

std::string_view step_status_name(StepStatus status) noexcept;
StepStatus step_status_from_name(std::string_view name);

struct Exchange {
  std::string prompt;
  std::string reply;

  friend bool operator==(const Exchange&, const Exchange&) = default;
};

struct ReasoningStep {
  std::string subproblem_id;
  std::string question;   // placeholders substituted
  std::string prompt;     // first prompt sent for this step
  std::string raw_reply;  // last reply received
  std::vector<Exchange> exchanges;
  std::optional<dsl::DslProgram> program;
  std::optional<dsl::ExecutionResult> execution;
  std::vector<std::string> program_errors;
  std::vector<Triple> claims;      // accepted claims
  std::vector<Triple> ungrounded;  // every ungrounded claim seen, first-seen order
  StepStatus status = StepStatus::failed;
  int program_retries = 0;
  int validation_retries = 0;
  TripleSet evidence;
  std::vector<EntityId> resolved_answer;
};

struct RankedAnswer {
  EntityId entity;
  std::size_t support = 0;

  friend bool operator==(const RankedAnswer&, const RankedAnswer&) = default;
};

struct ChainTrace {
  std::string origin_question;
  SubProblemPlan plan;
  std::vector<ReasoningStep> steps;  // topological order
  std::vector<RankedAnswer> final_answers;
  TripleSet total_evidence;
};

using AnswerMap = std::map<std::string, std::vector<EntityId>>;

struct UnresolvedPlaceholder : std::invalid_argument {
  explicit UnresolvedPlaceholder(const std::string& name);
  std::string placeholder;
};

/// Replaces `{dep}` for every declared dependency with its answers joined by ", ".
std::string substitute_placeholders(const SubProblem& subproblem, const AnswerMap& dependency_answers);

enum class PromptMode { program, answer };

std::string render_step_prompt(const SubProblem& subproblem, const AnswerMap& dependency_answers,
                               const TripleSet& evidence, const std::vector<RelationName>& relations,
                               PromptMode mode);

/// Mode follows the code-module switch; the baseline gets no evidence.
std::string render_step_prompt(const SubProblem& subproblem, const AnswerMap& dependency_answers,
                               const TripleSet& dependency_evidence, const std::vector<RelationName>& relations,
                               const ChainConfig& config);

/// Body of the first ```kgql fenced block, if any.
std::optional<std::string> extract_program_block(std::string_view reply);

/// Number of evidence triples connected to `entity` through the evidence graph.
std::size_t support_score(const EntityId& entity, const TripleSet& evidence);

ChainTrace run_chain(const llm::Provider& provider, const KnowledgeGraph& graph, const SubProblemPlan& plan,
                     const ChainConfig& config);

nlohmann::json trace_to_json(const ChainTrace& trace);
ChainTrace trace_from_json(const nlohmann::json& doc);

/// Human-readable rendering used by the `trace` command.
std::string render_trace(const ChainTrace& trace);

}  // namespace kgchain
