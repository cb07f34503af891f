#include "kgchain/decomposer.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "kgchain/prompt_markers.hpp"

namespace kgchain {

using nlohmann::json;

namespace {

ExpectedKind parse_kind(const std::string& text, const std::string& id) {
  if (text == "entity-set") return ExpectedKind::entity_set;
  if (text == "boolean") return ExpectedKind::boolean;
  if (text == "count") return ExpectedKind::count;
  throw PlanError(PlanErrorKind::schema, "sub-problem '" + id + "': unknown expected_kind '" + text + "'", {id});
}

std::string join(const std::vector<std::string>& ids, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += sep;
    out += ids[i];
  }
  return out;
}

/// `{token}` references in a question, in order of appearance.
std::vector<std::string> placeholders(std::string_view question) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while ((pos = question.find('{', pos)) != std::string_view::npos) {
    auto end = question.find('}', pos + 1);
    if (end == std::string_view::npos) break;
    out.emplace_back(question.substr(pos + 1, end - pos - 1));
    pos = end + 1;
  }
  return out;
}

std::string_view first_json_block(std::string_view reply) {
  constexpr std::string_view fence = "```json";
  auto open = reply.find(fence);
  if (open == std::string_view::npos) return reply;
  auto body = reply.find('\n', open);
  if (body == std::string_view::npos) return reply.substr(open + fence.size());
  auto close = reply.find("```", body + 1);
  return reply.substr(body + 1, close == std::string_view::npos ? std::string_view::npos : close - body - 1);
}

}  // namespace

std::string_view expected_kind_name(ExpectedKind kind) noexcept {
  switch (kind) {
    case ExpectedKind::entity_set:
      return "entity-set";
    case ExpectedKind::boolean:
      return "boolean";
    case ExpectedKind::count:
      return "count";
  }
  return "entity-set";
}

PlanError::PlanError(PlanErrorKind error_kind, const std::string& message, std::vector<std::string> named)
    : std::runtime_error(message), kind(error_kind), ids(std::move(named)) {}

const SubProblem& SubProblemPlan::find(std::string_view id) const {
  for (const auto& sp : subproblems) {
    if (sp.id == id) return sp;
  }
  throw std::out_of_range("no sub-problem '" + std::string(id) + "'");
}

const SubProblem& SubProblemPlan::terminal() const {
  std::set<std::string> depended;
  for (const auto& sp : subproblems) depended.insert(sp.depends_on.begin(), sp.depends_on.end());
  for (const auto& sp : subproblems) {
    if (!depended.contains(sp.id)) return sp;
  }
  throw std::logic_error("plan has no terminal sub-problem");
}

void check_plan(const SubProblemPlan& plan) {
  if (plan.subproblems.empty()) throw PlanError(PlanErrorKind::schema, "plan has no sub-problems");

  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < plan.subproblems.size(); ++i) {
    const auto& sp = plan.subproblems[i];
    if (sp.id.empty()) throw PlanError(PlanErrorKind::schema, "sub-problem #" + std::to_string(i + 1) + " has an empty id");
    if (!index.emplace(sp.id, i).second) {
      throw PlanError(PlanErrorKind::duplicate_id, "duplicate sub-problem id '" + sp.id + "'", {sp.id});
    }
  }
  for (const auto& sp : plan.subproblems) {
    if (sp.question.empty()) {
      throw PlanError(PlanErrorKind::schema, "sub-problem '" + sp.id + "': empty question", {sp.id});
    }
    std::set<std::string> seen;
    for (const auto& dep : sp.depends_on) {
      if (dep == sp.id) throw PlanError(PlanErrorKind::cycle, "sub-problem '" + sp.id + "' depends on itself", {sp.id});
      if (!index.contains(dep)) {
        throw PlanError(PlanErrorKind::schema, "sub-problem '" + sp.id + "': unknown dependency '" + dep + "'", {sp.id});
      }
      seen.insert(dep);
    }
    for (const auto& ref : placeholders(sp.question)) {
      if (index.contains(ref) && !seen.contains(ref)) {
        throw PlanError(PlanErrorKind::schema,
                        "sub-problem '" + sp.id + "': placeholder {" + ref + "} is not a declared dependency", {sp.id});
      }
    }
  }

  // Depth-first search for a cycle; the reported ids are the cycle itself.
  enum class Mark { none, active, done };
  std::vector<Mark> mark(plan.subproblems.size(), Mark::none);
  std::vector<std::string> stack;
  std::function<void(std::size_t)> visit = [&](std::size_t i) {
    mark[i] = Mark::active;
    stack.push_back(plan.subproblems[i].id);
    for (const auto& dep : plan.subproblems[i].depends_on) {
      std::size_t j = index.at(dep);
      if (mark[j] == Mark::active) {
        auto from = std::find(stack.begin(), stack.end(), dep);
        std::vector<std::string> cycle(from, stack.end());
        std::sort(cycle.begin(), cycle.end());
        throw PlanError(PlanErrorKind::cycle, "dependency cycle among " + join(cycle, ", "), cycle);
      }
      if (mark[j] == Mark::none) visit(j);
    }
    stack.pop_back();
    mark[i] = Mark::done;
  };
  for (std::size_t i = 0; i < plan.subproblems.size(); ++i) {
    if (mark[i] == Mark::none) visit(i);
  }

  std::set<std::string> depended;
  for (const auto& sp : plan.subproblems) depended.insert(sp.depends_on.begin(), sp.depends_on.end());
  std::vector<std::string> sinks;
  for (const auto& sp : plan.subproblems) {
    if (!depended.contains(sp.id)) sinks.push_back(sp.id);
  }
  if (sinks.size() != 1) {
    throw PlanError(PlanErrorKind::schema, "plan must have exactly one terminal sub-problem, found " +
                                               std::to_string(sinks.size()) + " (" + join(sinks, ", ") + ")",
                    sinks);
  }
}

SubProblemPlan plan_from_json(const json& doc, std::string origin_question) {
  if (!doc.is_object() || !doc.contains("subproblems") || !doc["subproblems"].is_array()) {
    throw PlanError(PlanErrorKind::schema, "missing field 'subproblems' (array)");
  }
  SubProblemPlan plan;
  plan.origin_question = std::move(origin_question);
  std::size_t n = 0;
  for (const auto& node : doc["subproblems"]) {
    ++n;
    if (!node.is_object()) throw PlanError(PlanErrorKind::schema, "sub-problem #" + std::to_string(n) + " is not an object");
    if (!node.contains("id") || !node["id"].is_string()) {
      throw PlanError(PlanErrorKind::schema, "sub-problem #" + std::to_string(n) + ": missing field 'id'");
    }
    SubProblem sp;
    sp.id = node["id"].get<std::string>();
    if (!node.contains("question") || !node["question"].is_string()) {
      throw PlanError(PlanErrorKind::schema, "sub-problem '" + sp.id + "': missing field 'question'", {sp.id});
    }
    sp.question = node["question"].get<std::string>();
    if (node.contains("depends_on")) {
      if (!node["depends_on"].is_array()) {
        throw PlanError(PlanErrorKind::schema, "sub-problem '" + sp.id + "': field 'depends_on' must be an array", {sp.id});
      }
      for (const auto& d : node["depends_on"]) {
        if (!d.is_string()) {
          throw PlanError(PlanErrorKind::schema, "sub-problem '" + sp.id + "': field 'depends_on' must hold strings", {sp.id});
        }
        sp.depends_on.push_back(d.get<std::string>());
      }
    }
    if (node.contains("expected_kind")) {
      if (!node["expected_kind"].is_string()) {
        throw PlanError(PlanErrorKind::schema, "sub-problem '" + sp.id + "': field 'expected_kind' must be a string", {sp.id});
      }
      sp.expected_kind = parse_kind(node["expected_kind"].get<std::string>(), sp.id);
    } else {
      throw PlanError(PlanErrorKind::schema, "sub-problem '" + sp.id + "': missing field 'expected_kind'", {sp.id});
    }
    plan.subproblems.push_back(std::move(sp));
  }
  check_plan(plan);
  return plan;
}

json plan_to_json(const SubProblemPlan& plan) {
  json nodes = json::array();
  for (const auto& sp : plan.subproblems) {
    nodes.push_back({{"id", sp.id},
                     {"question", sp.question},
                     {"depends_on", sp.depends_on},
                     {"expected_kind", expected_kind_name(sp.expected_kind)}});
  }
  return {{"subproblems", nodes}};
}

SubProblemPlan parse_plan(std::string_view reply, std::string origin_question) {
  std::string_view block = first_json_block(reply);
  json doc = json::parse(block.begin(), block.end(), nullptr, false);
  if (doc.is_discarded()) throw PlanError(PlanErrorKind::no_block, "reply contains no parseable JSON plan");
  return plan_from_json(doc, std::move(origin_question));
}

std::vector<std::string> topological_order(const SubProblemPlan& plan) {
  std::vector<std::string> order;
  std::set<std::string> placed;
  const std::size_t n = plan.subproblems.size();
  while (order.size() < n) {
    bool progressed = false;
    for (const auto& sp : plan.subproblems) {
      if (placed.contains(sp.id)) continue;
      bool ready = std::all_of(sp.depends_on.begin(), sp.depends_on.end(),
                               [&](const std::string& d) { return placed.contains(d); });
      if (!ready) continue;
      order.push_back(sp.id);
      placed.insert(sp.id);
      progressed = true;
      break;  // rescan from the front so earlier list entries win ties
    }
    if (!progressed) throw std::logic_error("topological_order: plan is cyclic");
  }
  return order;
}

SubProblemPlan fallback_plan(std::string question) {
  SubProblemPlan plan;
  plan.origin_question = question;
  plan.subproblems.push_back({"s1", std::move(question), {}, ExpectedKind::entity_set});
  return plan;
}

std::string render_decompose_prompt(std::string_view question, const std::vector<RelationName>& relations) {
  std::string out;
  out += "Break the question below into sub-problems that can each be answered by traversing a knowledge graph.\n";
  out += prompts::kQuestionPrefix;
  out += question;
  out += "\nRelations in the graph: ";
  for (std::size_t i = 0; i < relations.size() && i < kMaxRelationSample; ++i) {
    if (i) out += ", ";
    out += relations[i].str();
  }
  out += "\n";
  out += prompts::kDecomposeMarker;
  out += " inside a ```json fenced block with this schema:\n";
  out += R"({"subproblems": [{"id": "s1", "question": "...", "depends_on": [], "expected_kind": "entity-set"}]})";
  out += "\nexpected_kind is one of entity-set, boolean, count. ";
  out += "Refer to an earlier sub-problem's answer as {id} and list that id in depends_on. ";
  out += "Exactly one sub-problem must have no dependents; it answers the question.";
  return out;
}

SubProblemPlan decompose(const llm::Provider& provider, const std::string& question,
                         const std::vector<RelationName>& relations) {
  if (question.empty()) throw std::invalid_argument("decompose: question must be non-empty");
  const std::string prompt = render_decompose_prompt(question, relations);

  std::string reply = provider.complete(llm::CompletionRequest::from_prompt(prompt));
  try {
    return parse_plan(reply, question);
  } catch (const PlanError& first) {
    std::string repair = prompt + "\n\nYour previous plan was rejected: " + first.what() +
                         "\nReturn a corrected plan.";
    reply = provider.complete(llm::CompletionRequest::from_prompt(repair));
    try {
      return parse_plan(reply, question);
    } catch (const PlanError&) {
      return fallback_plan(question);
    }
  }
}

}  // namespace kgchain
