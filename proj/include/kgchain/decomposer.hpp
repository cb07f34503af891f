#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "kgchain/kg_store.hpp"
#include "kgchain/llm_gateway.hpp"

namespace kgchain {

enum class ExpectedKind { entity_set, boolean, count };

std::string_view expected_kind_name(ExpectedKind kind) noexcept;

struct SubProblem {
  std::string id;
  std::string question;
  std::vector<std::string> depends_on;
  ExpectedKind expected_kind = ExpectedKind::entity_set;

  friend bool operator==(const SubProblem&, const SubProblem&) = default;
};

/// A DAG of sub-problems with exactly one sink, the answer-bearing node.
/// Sub-problem questions may reference a dependency's answer as `{id}`.
struct SubProblemPlan {
  std::vector<SubProblem> subproblems;
  std::string origin_question;

  const SubProblem& find(std::string_view id) const;
  const SubProblem& terminal() const;

  friend bool operator==(const SubProblemPlan&, const SubProblemPlan&) = default;
};

enum class PlanErrorKind { no_block, schema, cycle, duplicate_id };

struct PlanError : std::runtime_error {
  PlanError(PlanErrorKind kind, const std::string& message, std::vector<std::string> ids = {});

  PlanErrorKind kind;
  std::vector<std::string> ids;  // node ids the error names
};

/// Checks every plan invariant; throws PlanError.
void check_plan(const SubProblemPlan& plan);

SubProblemPlan plan_from_json(const nlohmann::json& doc, std::string origin_question);
nlohmann::json plan_to_json(const SubProblemPlan& plan);

/// Reads the first ```json block (or the whole reply) as a plan.
SubProblemPlan parse_plan(std::string_view reply, std::string origin_question);

/// Dependencies before dependents; ties broken by plan list order.
std::vector<std::string> topological_order(const SubProblemPlan& plan);

SubProblemPlan fallback_plan(std::string question);

inline constexpr std::size_t kMaxRelationSample = 50;

std::string render_decompose_prompt(std::string_view question, const std::vector<RelationName>& relations);

/// One provider call, one repair round on a malformed reply, then the
/// single-node fallback plan. Provider errors propagate.
SubProblemPlan decompose(const llm::Provider& provider, const std::string& question,
                         const std::vector<RelationName>& relations);

}  // namespace kgchain
