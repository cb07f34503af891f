#pragma once

// kgql: the closed traversal language the model emits inside ```kgql blocks.
//
//   program   := statement (';' statement)* [';']
//   statement := OPCODE [ '(' [ string (',' string)* ] ')' ]
//   string    := '"' ( char | '\"' | '\\' )* '"'
//
// Opcode names are uppercase. Whitespace and newlines may appear between any
// two tokens. There are no comments.

#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "kgchain/kg_store.hpp"

namespace kgchain::dsl {

inline constexpr std::size_t kMaxInstructions = 32;

enum class Opcode { start, follow, follow_inv, save, load, intersect, union_, filter_has, return_ };

std::string_view opcode_name(Opcode op) noexcept;
std::optional<Opcode> opcode_from_name(std::string_view name) noexcept;
std::size_t opcode_arity(Opcode op) noexcept;

struct Instruction {
  Opcode opcode;
  std::vector<std::string> args;

  friend bool operator==(const Instruction&, const Instruction&) = default;
};

struct SourcePosition {
  std::size_t line = 1;
  std::size_t column = 1;
};

class DslProgram {
 public:
  DslProgram() = default;

  /// Builds a program without structural checks; validate() reports
  /// structural problems for programs not produced by parse().
  DslProgram(std::vector<Instruction> instructions, std::string source = {});

  const std::vector<Instruction>& instructions() const noexcept { return instructions_; }
  const std::string& source() const noexcept { return source_; }
  std::size_t size() const noexcept { return instructions_.size(); }

 private:
  std::vector<Instruction> instructions_;
  std::string source_;
};

struct ParseError : std::runtime_error {
  ParseError(SourcePosition where, std::string expected, const std::string& detail);

  SourcePosition position;
  std::string expected;
};

/// Parses and enforces the structural invariants (START first, a single
/// trailing RETURN, at most kMaxInstructions statements).
DslProgram parse(std::string_view source);

enum class IssueKind { unknown_relation, unknown_register, structural };

std::string_view issue_kind_name(IssueKind kind) noexcept;

struct ValidationIssue {
  std::size_t index;
  IssueKind kind;
  std::string message;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;

  bool ok() const noexcept { return issues.empty(); }
  std::string summary() const;
};

ValidationReport validate(const DslProgram& program, const KnowledgeGraph& graph);

struct ExecutionResult {
  EntitySet result;
  TripleSet evidence;
  std::size_t steps_executed = 0;

  friend bool operator==(const ExecutionResult&, const ExecutionResult&) = default;
};

/// Thrown when execute() is handed a program that does not validate.
struct UsageError : std::logic_error {
  using std::logic_error::logic_error;
};

ExecutionResult execute(const DslProgram& program, const KnowledgeGraph& graph);

/// One statement per line, canonical spacing, string escapes re-applied.
std::string pretty_print(const DslProgram& program);

std::string quote(std::string_view text);

}  // namespace kgchain::dsl
