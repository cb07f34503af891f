#include <sstream>

#include <nlohmann/json.hpp>

#include "kgchain/chain_executor.hpp"

namespace kgchain {

using nlohmann::json;

namespace {

json triple_json(const Triple& t) { return json::array({t.subject.str(), t.relation.str(), t.object.str()}); }

Triple triple_from(const json& j) {
  return make_triple(j.at(0).get<std::string>(), j.at(1).get<std::string>(), j.at(2).get<std::string>());
}

template <typename Range>
json triples_json(const Range& triples) {
  json out = json::array();
  for (const auto& t : triples) out.push_back(triple_json(t));
  return out;
}

template <typename Range>
json entities_json(const Range& entities) {
  json out = json::array();
  for (const auto& e : entities) out.push_back(e.str());
  return out;
}

std::vector<EntityId> entities_from(const json& j) {
  std::vector<EntityId> out;
  for (const auto& e : j) out.emplace_back(e.get<std::string>());
  return out;
}

json step_json(const ReasoningStep& s) {
  json exchanges = json::array();
  for (const auto& x : s.exchanges) exchanges.push_back({{"prompt", x.prompt}, {"reply", x.reply}});
  json j = {
      {"subproblem_id", s.subproblem_id},
      {"question", s.question},
      {"prompt", s.prompt},
      {"raw_reply", s.raw_reply},
      {"exchanges", exchanges},
      {"program", nullptr},
      {"execution", nullptr},
      {"program_errors", s.program_errors},
      {"claims", triples_json(s.claims)},
      {"ungrounded_claims", triples_json(s.ungrounded)},
      {"status", step_status_name(s.status)},
      {"program_retries", s.program_retries},
      {"validation_retries", s.validation_retries},
      {"evidence", triples_json(s.evidence)},
      {"resolved_answer", entities_json(s.resolved_answer)},
  };
  if (s.program) j["program"] = {{"source", s.program->source()}, {"canonical", dsl::pretty_print(*s.program)}};
  if (s.execution) {
    j["execution"] = {{"result", entities_json(s.execution->result)},
                      {"evidence", triples_json(s.execution->evidence)},
                      {"steps_executed", s.execution->steps_executed}};
  }
  return j;
}

ReasoningStep step_from(const json& j) {
  ReasoningStep s;
  s.subproblem_id = j.at("subproblem_id").get<std::string>();
  s.question = j.at("question").get<std::string>();
  s.prompt = j.at("prompt").get<std::string>();
  s.raw_reply = j.at("raw_reply").get<std::string>();
  for (const auto& x : j.at("exchanges")) {
    s.exchanges.push_back({x.at("prompt").get<std::string>(), x.at("reply").get<std::string>()});
  }
  if (!j.at("program").is_null()) s.program = dsl::parse(j["program"].at("source").get<std::string>());
  if (!j.at("execution").is_null()) {
    dsl::ExecutionResult r;
    for (const auto& e : entities_from(j["execution"].at("result"))) r.result.insert(e);
    for (const auto& t : j["execution"].at("evidence")) r.evidence.insert(triple_from(t));
    r.steps_executed = j["execution"].at("steps_executed").get<std::size_t>();
    s.execution = std::move(r);
  }
  s.program_errors = j.at("program_errors").get<std::vector<std::string>>();
  for (const auto& t : j.at("claims")) s.claims.push_back(triple_from(t));
  for (const auto& t : j.at("ungrounded_claims")) s.ungrounded.push_back(triple_from(t));
  s.status = step_status_from_name(j.at("status").get<std::string>());
  s.program_retries = j.at("program_retries").get<int>();
  s.validation_retries = j.at("validation_retries").get<int>();
  for (const auto& t : j.at("evidence")) s.evidence.insert(triple_from(t));
  s.resolved_answer = entities_from(j.at("resolved_answer"));
  return s;
}

}  // namespace

json trace_to_json(const ChainTrace& trace) {
  json steps = json::array();
  for (const auto& s : trace.steps) steps.push_back(step_json(s));
  json answers = json::array();
  for (const auto& a : trace.final_answers) answers.push_back({{"entity", a.entity.str()}, {"support", a.support}});
  return {
      {"origin_question", trace.origin_question},
      {"plan", plan_to_json(trace.plan)},
      {"steps", steps},
      {"final_answers", answers},
      {"total_evidence", triples_json(trace.total_evidence)},
  };
}

ChainTrace trace_from_json(const json& doc) {
  ChainTrace trace;
  trace.origin_question = doc.at("origin_question").get<std::string>();
  trace.plan = plan_from_json(doc.at("plan"), trace.origin_question);
  for (const auto& s : doc.at("steps")) trace.steps.push_back(step_from(s));
  for (const auto& a : doc.at("final_answers")) {
    trace.final_answers.push_back({EntityId(a.at("entity").get<std::string>()), a.at("support").get<std::size_t>()});
  }
  for (const auto& t : doc.at("total_evidence")) trace.total_evidence.insert(triple_from(t));
  return trace;
}

std::string render_trace(const ChainTrace& trace) {
  std::ostringstream os;
  os << "Question: " << trace.origin_question << "\n";
  os << "Plan:\n";
  for (const auto& sp : trace.plan.subproblems) {
    os << "  " << sp.id << ": " << sp.question;
    if (!sp.depends_on.empty()) {
      os << "  (after";
      for (const auto& d : sp.depends_on) os << ' ' << d;
      os << ')';
    }
    os << " [" << expected_kind_name(sp.expected_kind) << "]\n";
  }
  for (const auto& s : trace.steps) {
    os << "\nStep " << s.subproblem_id << " [" << step_status_name(s.status);
    if (s.program_retries) os << ", " << s.program_retries << " program retries";
    if (s.validation_retries) os << ", " << s.validation_retries << " validation retries";
    os << "]\n";
    os << "  question: " << s.question << "\n";
    if (s.program) {
      os << "  program:\n";
      std::istringstream lines(dsl::pretty_print(*s.program));
      for (std::string line; std::getline(lines, line);) os << "    " << line << "\n";
    }
    for (const auto& e : s.program_errors) os << "  rejected: " << e << "\n";
    for (const auto& t : s.evidence) os << "  evidence: " << to_evidence_line(t) << "\n";
    for (const auto& t : s.claims) os << "  claim: " << to_evidence_line(t) << "\n";
    for (const auto& t : s.ungrounded) os << "  ungrounded: " << to_evidence_line(t) << "\n";
    os << "  answer:";
    for (const auto& a : s.resolved_answer) os << ' ' << a.str();
    os << "\n";
  }
  os << "\nFinal answers:\n";
  for (std::size_t i = 0; i < trace.final_answers.size(); ++i) {
    os << "  " << i + 1 << ". " << trace.final_answers[i].entity.str()
       << " (support=" << trace.final_answers[i].support << ")\n";
  }
  return os.str();
}

}  // namespace kgchain
