#include "kgchain/dsl.hpp"

#include <array>
#include <set>
#include <sstream>

namespace kgchain::dsl {

namespace {

struct OpcodeInfo {
  Opcode op;
  std::string_view name;
  std::size_t arity;
};

constexpr std::array<OpcodeInfo, 9> kOpcodes{{
    {Opcode::start, "START", 1},
    {Opcode::follow, "FOLLOW", 1},
    {Opcode::follow_inv, "FOLLOW_INV", 1},
    {Opcode::save, "SAVE", 1},
    {Opcode::load, "LOAD", 1},
    {Opcode::intersect, "INTERSECT", 1},
    {Opcode::union_, "UNION", 1},
    {Opcode::filter_has, "FILTER_HAS", 2},
    {Opcode::return_, "RETURN", 0},
}};

constexpr std::string_view kOpcodeList =
    "opcode (START, FOLLOW, FOLLOW_INV, SAVE, LOAD, INTERSECT, UNION, FILTER_HAS, RETURN)";

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  DslProgram run() {
    std::vector<Instruction> out;
    skip_ws();
    if (at_end()) fail(here(), std::string(kOpcodeList), "empty program");
    while (true) {
      skip_ws();
      SourcePosition stmt_pos = here();
      if (out.size() == kMaxInstructions) {
        fail(stmt_pos, "end of program", "programs are limited to " + std::to_string(kMaxInstructions) +
                                             " instructions");
      }
      Instruction ins = statement(stmt_pos);
      if (out.empty() && ins.opcode != Opcode::start) {
        fail(stmt_pos, "START", "program must begin with START");
      }
      bool is_return = ins.opcode == Opcode::return_;
      out.push_back(std::move(ins));

      skip_ws();
      if (at_end()) {
        if (!is_return) fail(here(), "RETURN", "program must end with RETURN");
        break;
      }
      if (peek() != ';') fail(here(), "';'", std::string("unexpected character '") + peek() + "'");
      advance();
      skip_ws();
      if (at_end()) {
        if (!is_return) fail(here(), "RETURN", "program must end with RETURN");
        break;
      }
      if (is_return) fail(stmt_pos, "end of program after RETURN", "RETURN must be the last instruction");
    }
    return DslProgram(std::move(out), std::string(text_));
  }

 private:
  Instruction statement(SourcePosition stmt_pos) {
    if (at_end() || !is_ident_char(peek())) {
      fail(here(), std::string(kOpcodeList),
           at_end() ? std::string("end of input") : std::string("unexpected character '") + peek() + "'");
    }
    std::string name;
    while (!at_end() && is_ident_char(peek())) {
      name.push_back(peek());
      advance();
    }
    auto op = opcode_from_name(name);
    if (!op) fail(stmt_pos, std::string(kOpcodeList), "unknown opcode '" + name + "'");

    Instruction ins{*op, {}};
    skip_ws();
    if (!at_end() && peek() == '(') {
      advance();
      skip_ws();
      if (!at_end() && peek() == ')') {
        advance();
      } else {
        while (true) {
          skip_ws();
          ins.args.push_back(string_literal());
          skip_ws();
          if (at_end()) fail(here(), "',' or ')'", "end of input");
          if (peek() == ',') {
            advance();
            continue;
          }
          if (peek() == ')') {
            advance();
            break;
          }
          fail(here(), "',' or ')'", std::string("unexpected character '") + peek() + "'");
        }
      }
    }
    std::size_t arity = opcode_arity(*op);
    if (ins.args.size() != arity) {
      fail(stmt_pos, std::to_string(arity) + " argument(s) for " + name,
           "got " + std::to_string(ins.args.size()));
    }
    return ins;
  }

  std::string string_literal() {
    SourcePosition start = here();
    if (at_end() || peek() != '"') {
      fail(here(), "double-quoted string",
           at_end() ? std::string("end of input") : std::string("unexpected character '") + peek() + "'");
    }
    advance();
    std::string value;
    while (true) {
      if (at_end()) fail(here(), "closing '\"'", "unterminated string");
      char c = peek();
      advance();
      if (c == '"') break;
      if (c == '\\') {
        if (at_end()) fail(here(), "escape character", "unterminated string");
        char e = peek();
        if (e != '"' && e != '\\') fail(here(), "'\\\"' or '\\\\'", std::string("invalid escape '\\") + e + "'");
        advance();
        value.push_back(e);
        continue;
      }
      value.push_back(c);
    }
    if (value.empty()) fail(start, "non-empty string", "empty argument");
    return value;
  }

  static bool is_ident_char(char c) {
    return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || c == '_';
  }

  bool at_end() const { return pos_ >= text_.size(); }
  char peek() const { return text_[pos_]; }

  void advance() {
    if (text_[pos_] == '\n') {
      ++line_;
      column_ = 1;
    } else {
      ++column_;
    }
    ++pos_;
  }

  void skip_ws() {
    while (!at_end()) {
      char c = peek();
      if (c != ' ' && c != '\t' && c != '\n' && c != '\r') break;
      advance();
    }
  }

  SourcePosition here() const { return {line_, column_}; }

  [[noreturn]] void fail(SourcePosition where, std::string expected, const std::string& detail) const {
    throw ParseError(where, std::move(expected), detail);
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
  std::size_t column_ = 1;
};

void add_issue(ValidationReport& report, std::size_t index, IssueKind kind, std::string message) {
  report.issues.push_back({index, kind, std::move(message)});
}

}  // namespace

std::string_view opcode_name(Opcode op) noexcept {
  for (const auto& info : kOpcodes) {
    if (info.op == op) return info.name;
  }
  return "?";
}

std::optional<Opcode> opcode_from_name(std::string_view name) noexcept {
  for (const auto& info : kOpcodes) {
    if (info.name == name) return info.op;
  }
  return std::nullopt;
}

std::size_t opcode_arity(Opcode op) noexcept {
  for (const auto& info : kOpcodes) {
    if (info.op == op) return info.arity;
  }
  return 0;
}

DslProgram::DslProgram(std::vector<Instruction> instructions, std::string source)
    : instructions_(std::move(instructions)), source_(std::move(source)) {}

ParseError::ParseError(SourcePosition where, std::string expected_token, const std::string& detail)
    : std::runtime_error("kgql parse error at line " + std::to_string(where.line) + ", column " +
                         std::to_string(where.column) + ": expected " + expected_token + " (" + detail + ")"),
      position(where),
      expected(std::move(expected_token)) {}

DslProgram parse(std::string_view source) { return Parser(source).run(); }

std::string_view issue_kind_name(IssueKind kind) noexcept {
  switch (kind) {
    case IssueKind::unknown_relation:
      return "unknown-relation";
    case IssueKind::unknown_register:
      return "unknown-register";
    case IssueKind::structural:
      return "structural";
  }
  return "?";
}

std::string ValidationReport::summary() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < issues.size(); ++i) {
    if (i) os << "; ";
    os << "instruction " << issues[i].index << ": " << issue_kind_name(issues[i].kind) << ": "
       << issues[i].message;
  }
  return os.str();
}

ValidationReport validate(const DslProgram& program, const KnowledgeGraph& graph) {
  ValidationReport report;
  const auto& ins = program.instructions();

  if (ins.empty()) {
    add_issue(report, 0, IssueKind::structural, "program is empty");
    return report;
  }
  if (ins.size() > kMaxInstructions) {
    add_issue(report, kMaxInstructions, IssueKind::structural,
              "program exceeds " + std::to_string(kMaxInstructions) + " instructions");
  }
  if (ins.front().opcode != Opcode::start) {
    add_issue(report, 0, IssueKind::structural, "program must begin with START");
  }
  if (ins.back().opcode != Opcode::return_) {
    add_issue(report, ins.size() - 1, IssueKind::structural, "program must end with RETURN");
  }

  std::set<std::string> saved;
  for (std::size_t i = 0; i < ins.size(); ++i) {
    const auto& in = ins[i];
    if (in.args.size() != opcode_arity(in.opcode)) {
      add_issue(report, i, IssueKind::structural,
                std::string(opcode_name(in.opcode)) + " takes " + std::to_string(opcode_arity(in.opcode)) +
                    " argument(s)");
      continue;
    }
    bool empty_arg = false;
    for (const auto& a : in.args) empty_arg = empty_arg || a.empty();
    if (empty_arg) {
      add_issue(report, i, IssueKind::structural, "empty argument");
      continue;
    }
    switch (in.opcode) {
      case Opcode::return_:
        if (i + 1 != ins.size()) add_issue(report, i, IssueKind::structural, "RETURN must be the last instruction");
        break;
      case Opcode::follow:
      case Opcode::follow_inv: {
        const auto& r = in.args[0];
        if (!RelationName::is_valid(r) || !graph.has_relation(RelationName(r))) {
          add_issue(report, i, IssueKind::unknown_relation, "relation '" + r + "' is not in the graph");
        }
        break;
      }
      case Opcode::save:
        saved.insert(in.args[0]);
        break;
      case Opcode::load:
      case Opcode::intersect:
      case Opcode::union_:
        if (!saved.contains(in.args[0])) {
          add_issue(report, i, IssueKind::unknown_register, "register '" + in.args[0] + "' is read before SAVE");
        }
        break;
      case Opcode::start:
      case Opcode::filter_has:
        break;
    }
  }
  return report;
}

ExecutionResult execute(const DslProgram& program, const KnowledgeGraph& graph) {
  auto report = validate(program, graph);
  if (!report.ok()) throw UsageError("execute called on an invalid program: " + report.summary());

  ExecutionResult out;
  EntitySet working;
  std::map<std::string, EntitySet> registers;

  auto absorb = [&](Traversal t) {
    working = std::move(t.entities);
    out.evidence.merge(t.evidence);
  };

  for (const auto& in : program.instructions()) {
    ++out.steps_executed;
    switch (in.opcode) {
      case Opcode::start:
        working.clear();
        if (EntityId::is_valid(in.args[0])) {
          EntityId e(in.args[0]);
          if (graph.has_entity(e)) working.insert(std::move(e));
        }
        break;
      case Opcode::follow:
        absorb(graph.follow(working, RelationName(in.args[0])));
        break;
      case Opcode::follow_inv:
        absorb(graph.follow_inverse(working, RelationName(in.args[0])));
        break;
      case Opcode::save:
        registers[in.args[0]] = working;
        break;
      case Opcode::load:
        working = registers.at(in.args[0]);
        break;
      case Opcode::intersect: {
        const auto& other = registers.at(in.args[0]);
        std::erase_if(working, [&](const EntityId& e) { return !other.contains(e); });
        break;
      }
      case Opcode::union_: {
        const auto& other = registers.at(in.args[0]);
        working.insert(other.begin(), other.end());
        break;
      }
      case Opcode::filter_has: {
        if (!RelationName::is_valid(in.args[0]) || !EntityId::is_valid(in.args[1])) {
          working.clear();
          break;
        }
        RelationName r(in.args[0]);
        EntityId target(in.args[1]);
        EntitySet kept;
        for (const auto& s : working) {
          Triple t{s, r, target};
          if (graph.contains(t)) {
            kept.insert(s);
            out.evidence.insert(std::move(t));
          }
        }
        working = std::move(kept);
        break;
      }
      case Opcode::return_:
        out.result = working;
        return out;
    }
  }
  return out;
}

std::string quote(std::string_view text) {
  std::string out = "\"";
  for (char c : text) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string pretty_print(const DslProgram& program) {
  std::string out;
  const auto& ins = program.instructions();
  for (std::size_t i = 0; i < ins.size(); ++i) {
    if (i) out.push_back('\n');
    out += opcode_name(ins[i].opcode);
    if (!ins[i].args.empty()) {
      out.push_back('(');
      for (std::size_t a = 0; a < ins[i].args.size(); ++a) {
        if (a) out += ", ";
        out += quote(ins[i].args[a]);
      }
      out.push_back(')');
    }
    out.push_back(';');
  }
  return out;
}

}  // namespace kgchain::dsl
