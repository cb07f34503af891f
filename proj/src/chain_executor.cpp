#include "kgchain/chain_executor.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "kgchain/grounding.hpp"
#include "kgchain/prompt_markers.hpp"

namespace kgchain {

namespace {

constexpr std::string_view kProgramFramingText =
    "You are solving one step of a larger question with the help of a knowledge graph. "
    "Rely only on the known facts below and on facts retrieved by a traversal program.";
constexpr std::string_view kAnswerFramingText =
    "You are solving one step of a larger question. Answer the sub-question directly.";

constexpr std::string_view kGrammarReminder =
    "Opcodes: START(e), FOLLOW(r), FOLLOW_INV(r), SAVE(x), LOAD(x), INTERSECT(x), UNION(x), FILTER_HAS(r, e), RETURN.\n"
    "START sets the working set to one entity; FOLLOW/FOLLOW_INV move along a relation forwards/backwards; "
    "SAVE/LOAD store and restore the working set in a named register; INTERSECT/UNION combine it with a register; "
    "FILTER_HAS keeps entities that have relation r to entity e.\n"
    "Arguments are double-quoted strings; escape \" and \\ with a backslash. "
    "Separate statements with ';'. Begin with START, end with RETURN, at most 32 statements.";

std::string join_entities(const std::vector<EntityId>& entities) {
  std::string out;
  for (std::size_t i = 0; i < entities.size(); ++i) {
    if (i) out += ", ";
    out += entities[i].str();
  }
  return out;
}

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

/// Position of the first whole-token occurrence of `needle`, or npos.
std::size_t find_mention(std::string_view text, std::string_view needle) {
  std::size_t pos = 0;
  while ((pos = text.find(needle, pos)) != std::string_view::npos) {
    bool left = pos == 0 || !is_word_char(text[pos - 1]) || !is_word_char(needle.front());
    std::size_t end = pos + needle.size();
    bool right = end == text.size() || !is_word_char(text[end]) || !is_word_char(needle.back());
    if (left && right) return pos;
    ++pos;
  }
  return std::string_view::npos;
}

std::vector<EntityId> sorted_entities(const EntitySet& set) { return {set.begin(), set.end()}; }

void add_unique(std::vector<Triple>& into, const std::vector<Triple>& items) {
  for (const auto& t : items) {
    if (std::find(into.begin(), into.end(), t) == into.end()) into.push_back(t);
  }
}

class StepRunner {
 public:
  StepRunner(const llm::Provider& provider, const KnowledgeGraph& graph, const ChainConfig& config,
             ReasoningStep& step)
      : provider_(provider), graph_(graph), config_(config), step_(step) {}

  std::string ask(const std::string& prompt) {
    std::string reply = provider_.complete(llm::CompletionRequest::from_prompt(prompt));
    if (step_.exchanges.empty()) step_.prompt = prompt;
    step_.exchanges.push_back({prompt, reply});
    step_.raw_reply = reply;
    return reply;
  }

  /// Returns true when a program executed with a non-empty result.
  bool run_program_phase(const std::string& prompt) {
    std::string current = prompt;
    for (int attempt = 0; attempt <= config_.program_retries; ++attempt) {
      std::string reply = ask(current);
      std::string error;
      if (auto block = extract_program_block(reply)) {
        try {
          dsl::DslProgram program = dsl::parse(*block);
          auto report = dsl::validate(program, graph_);
          if (!report.ok()) {
            error = "program failed validation: " + report.summary();
          } else {
            auto result = dsl::execute(program, graph_);
            if (result.result.empty()) {
              error = "program returned no entities; check the entity names and relations";
            } else {
              step_.program = std::move(program);
              step_.execution = std::move(result);
              step_.program_retries = attempt;
              step_.status = attempt == 0 ? StepStatus::ok : StepStatus::program_retried;
              program_prompt_ = current;
              return true;
            }
          }
        } catch (const dsl::ParseError& e) {
          error = e.what();
        }
      } else {
        error = "no ```kgql fenced block found";
      }
      step_.program_errors.push_back(error);
      current = prompt + "\n\nYour previous reply was rejected: " + error +
                "\nReply again with a corrected ```kgql program.";
    }
    return false;
  }

  /// Claims from `reply`, re-requested while grounding fails. Returns the
  /// final extraction and whether ungrounded claims had to be stripped.
  std::pair<grounding::ClaimExtraction, bool> ground(const std::string& base_prompt, std::string reply) {
    auto extraction = grounding::extract(reply);
    if (!config_.grounding) {
      step_.claims = extraction.claims;
      return {std::move(extraction), false};
    }
    for (int round = 0;; ++round) {
      auto report = grounding::check(extraction.claims, graph_);
      add_unique(step_.ungrounded, report.ungrounded);
      if (report.pass()) {
        step_.claims = extraction.claims;
        return {std::move(extraction), false};
      }
      if (round == config_.validation_retries) {
        step_.claims = report.grounded;
        return {std::move(extraction), true};
      }
      std::string retry = base_prompt + "\n\nThese claims are not supported by the knowledge graph:\n";
      for (const auto& c : report.ungrounded) retry += "CLAIM: " + to_evidence_line(c) + "\n";
      retry += "Revise your reply and state only supported claims.";
      ++step_.validation_retries;
      extraction = grounding::extract(ask(retry));
    }
  }

  /// Answers kept after stripping: only those seen in evidence or a grounded claim.
  std::vector<EntityId> supported_only(const std::vector<EntityId>& answers) const {
    EntitySet support;
    for (const auto& t : step_.evidence) {
      support.insert(t.subject);
      support.insert(t.object);
    }
    for (const auto& t : step_.claims) {
      support.insert(t.subject);
      support.insert(t.object);
    }
    std::vector<EntityId> out;
    for (const auto& a : answers) {
      if (support.contains(a)) out.push_back(a);
    }
    return out;
  }

  const std::string& program_prompt() const { return program_prompt_; }

 private:
  const llm::Provider& provider_;
  const KnowledgeGraph& graph_;
  const ChainConfig& config_;
  ReasoningStep& step_;
  std::string program_prompt_;
};

EntitySet fallback_centers(const SubProblem& sp, const AnswerMap& answers, const std::string& question,
                           const KnowledgeGraph& graph) {
  EntitySet centers;
  for (const auto& dep : sp.depends_on) {
    auto it = answers.find(dep);
    if (it != answers.end()) centers.insert(it->second.begin(), it->second.end());
  }
  for (const auto& e : graph.entities()) {
    if (find_mention(question, e.str()) != std::string_view::npos) centers.insert(e);
  }
  return centers;
}

}  // namespace

void ChainConfig::check() const {
  if (program_retries < 0 || validation_retries < 0 || fallback_hops < 0) {
    throw std::invalid_argument("chain config counts must be >= 0");
  }
}

std::string ChainConfig::label() const { return code_module ? "KDCM + Code Module" : "KDCM"; }

std::string_view step_status_name(StepStatus status) noexcept {
  switch (status) {
    case StepStatus::ok:
      return "ok";
    case StepStatus::program_retried:
      return "program-retried";
    case StepStatus::fallback_retrieval:
      return "fallback-retrieval";
    case StepStatus::plain_answer:
      return "plain-answer";
    case StepStatus::failed:
      return "failed";
  }
  return "failed";
}

StepStatus step_status_from_name(std::string_view name) {
  for (auto s : {StepStatus::ok, StepStatus::program_retried, StepStatus::fallback_retrieval, StepStatus::plain_answer,
                 StepStatus::failed}) {
    if (step_status_name(s) == name) return s;
  }
  throw std::invalid_argument("unknown step status '" + std::string(name) + "'");
}

UnresolvedPlaceholder::UnresolvedPlaceholder(const std::string& name)
    : std::invalid_argument("unresolved placeholder {" + name + "}"), placeholder(name) {}

std::string substitute_placeholders(const SubProblem& sp, const AnswerMap& answers) {
  std::string out;
  std::string_view q = sp.question;
  std::size_t pos = 0;
  while (pos < q.size()) {
    auto open = q.find('{', pos);
    if (open == std::string_view::npos) break;
    auto close = q.find('}', open + 1);
    if (close == std::string_view::npos) break;
    std::string name(q.substr(open + 1, close - open - 1));
    out.append(q.substr(pos, open - pos));
    bool declared = std::find(sp.depends_on.begin(), sp.depends_on.end(), name) != sp.depends_on.end();
    auto it = answers.find(name);
    if (declared && it == answers.end()) throw UnresolvedPlaceholder(name);
    if (it != answers.end()) {
      out += join_entities(it->second);
    } else {
      out.append(q.substr(open, close - open + 1));
    }
    pos = close + 1;
  }
  out.append(q.substr(std::min(pos, q.size())));
  return out;
}

std::string render_step_prompt(const SubProblem& sp, const AnswerMap& answers, const TripleSet& evidence,
                               const std::vector<RelationName>& relations, PromptMode mode) {
  const std::string question = substitute_placeholders(sp, answers);
  std::string out;
  out += mode == PromptMode::program ? kProgramFramingText : kAnswerFramingText;
  out += "\n\nKnown facts:\n";
  if (evidence.empty()) {
    out += "(none)\n";
  } else {
    for (const auto& t : evidence) out += to_evidence_line(t) + "\n";
  }
  out += "\n";
  out += prompts::kSubQuestionPrefix;
  out += question;
  out += "\n\n";
  if (mode == PromptMode::program) {
    out += "Write a traversal program that answers the sub-question inside a fenced block:\n";
    out += prompts::kProgramFence;
    out += "\nSTART(\"entity\"); FOLLOW(\"relation\"); RETURN;\n```\n";
    out += kGrammarReminder;
    out += "\nRelations: ";
    for (std::size_t i = 0; i < relations.size() && i < kMaxRelationSample; ++i) {
      if (i) out += ", ";
      out += relations[i].str();
    }
    out += "\n";
  } else {
    out += "Answer from the known facts and what you know.\n";
  }
  out += grounding::protocol_instructions();
  return out;
}

std::string render_step_prompt(const SubProblem& sp, const AnswerMap& answers, const TripleSet& dependency_evidence,
                               const std::vector<RelationName>& relations, const ChainConfig& config) {
  if (config.code_module) return render_step_prompt(sp, answers, dependency_evidence, relations, PromptMode::program);
  return render_step_prompt(sp, answers, TripleSet{}, relations, PromptMode::answer);
}

std::optional<std::string> extract_program_block(std::string_view reply) {
  auto trimmed = [](std::string_view line) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) line.remove_suffix(1);
    while (!line.empty() && (line.front() == ' ' || line.front() == '\t')) line.remove_prefix(1);
    return line;
  };
  std::size_t pos = 0;
  bool inside = false;
  std::string body;
  while (pos <= reply.size()) {
    auto end = reply.find('\n', pos);
    std::string_view line = reply.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
    if (!inside) {
      if (trimmed(line) == prompts::kProgramFence) inside = true;
    } else {
      if (trimmed(line) == "```") return body;
      body.append(line);
      body.push_back('\n');
    }
    if (end == std::string_view::npos) break;
    pos = end + 1;
  }
  return std::nullopt;
}

std::size_t support_score(const EntityId& entity, const TripleSet& evidence) {
  std::set<EntityId> reached{entity};
  std::set<const Triple*> counted;
  bool grew = true;
  while (grew) {
    grew = false;
    for (const auto& t : evidence) {
      if (counted.contains(&t)) continue;
      if (reached.contains(t.subject) || reached.contains(t.object)) {
        counted.insert(&t);
        reached.insert(t.subject);
        reached.insert(t.object);
        grew = true;
      }
    }
  }
  return counted.size();
}

ChainTrace run_chain(const llm::Provider& provider, const KnowledgeGraph& graph, const SubProblemPlan& plan,
                     const ChainConfig& config) {
  check_plan(plan);
  config.check();

  ChainTrace trace;
  trace.origin_question = plan.origin_question;
  trace.plan = plan;

  const auto relations = graph.relation_sample(kMaxRelationSample);
  AnswerMap answers;
  std::map<std::string, const ReasoningStep*> by_id;
  trace.steps.reserve(plan.subproblems.size());

  for (const auto& id : topological_order(plan)) {
    const SubProblem& sp = plan.find(id);
    trace.steps.emplace_back();
    ReasoningStep& step = trace.steps.back();
    step.subproblem_id = id;
    step.question = substitute_placeholders(sp, answers);

    TripleSet dep_evidence;
    for (const auto& dep : sp.depends_on) {
      const auto& ev = by_id.at(dep)->evidence;
      dep_evidence.insert(ev.begin(), ev.end());
    }

    StepRunner runner(provider, graph, config, step);

    if (config.code_module) {
      std::string prompt = render_step_prompt(sp, answers, dep_evidence, relations, PromptMode::program);
      if (runner.run_program_phase(prompt)) {
        step.evidence = step.execution->evidence;
        step.resolved_answer = sorted_entities(step.execution->result);
        runner.ground(runner.program_prompt(), step.raw_reply);
      } else {
        EntitySet centers = fallback_centers(sp, answers, step.question, graph);
        if (config.fallback_hops > 0) {
          for (const auto& c : centers) {
            auto near = graph.neighborhood(c, static_cast<std::size_t>(config.fallback_hops));
            step.evidence.insert(near.begin(), near.end());
          }
        }
        std::string fallback = render_step_prompt(sp, answers, step.evidence, relations, PromptMode::answer);
        auto [extraction, stripped] = runner.ground(fallback, runner.ask(fallback));
        auto candidates = stripped ? runner.supported_only(extraction.answers) : extraction.answers;

        EntitySet nearby;
        for (const auto& t : step.evidence) {
          nearby.insert(t.subject);
          nearby.insert(t.object);
        }
        for (const auto& a : candidates) {
          if (nearby.contains(a)) step.resolved_answer.push_back(a);
        }
        if (step.resolved_answer.empty()) {
          for (const auto& e : nearby) {
            if (!centers.contains(e)) step.resolved_answer.push_back(e);
          }
        }
        step.status = StepStatus::fallback_retrieval;
      }
    } else {
      std::string prompt = render_step_prompt(sp, answers, dep_evidence, relations, config);
      auto [extraction, stripped] = runner.ground(prompt, runner.ask(prompt));
      step.resolved_answer = stripped ? runner.supported_only(extraction.answers) : extraction.answers;
      step.status = step.resolved_answer.empty() ? StepStatus::failed : StepStatus::plain_answer;
    }

    trace.total_evidence.insert(step.evidence.begin(), step.evidence.end());
    answers[id] = step.resolved_answer;
    by_id[id] = &step;
  }

  const std::string terminal = plan.terminal().id;
  const ReasoningStep& last = *by_id.at(terminal);

  struct Candidate {
    RankedAnswer answer;
    std::size_t mention;
    std::size_t order;
  };
  std::vector<Candidate> ranked;
  for (std::size_t i = 0; i < last.resolved_answer.size(); ++i) {
    const auto& e = last.resolved_answer[i];
    ranked.push_back({{e, support_score(e, trace.total_evidence)}, find_mention(last.raw_reply, e.str()), i});
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const Candidate& a, const Candidate& b) {
    if (a.answer.support != b.answer.support) return a.answer.support > b.answer.support;
    if (a.mention != b.mention) return a.mention < b.mention;
    return a.order < b.order;
  });
  for (auto& c : ranked) trace.final_answers.push_back(std::move(c.answer));
  return trace;
}

}  // namespace kgchain
