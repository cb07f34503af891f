#pragma once

// Line protocol for model replies:
//   CLAIM: subject | relation | object
//   ANSWER: a, b, c
// Anything else is free text.

#include <string>
#include <string_view>
#include <vector>

#include "kgchain/kg_store.hpp"

namespace kgchain::grounding {

struct ClaimExtraction {
  std::vector<Triple> claims;
  std::vector<EntityId> answers;  // first-mention order, deduplicated
  std::string remainder;
};

ClaimExtraction extract(std::string_view reply);

struct GroundingReport {
  std::vector<Triple> grounded;
  std::vector<Triple> ungrounded;

  bool pass() const noexcept { return ungrounded.empty(); }
};

GroundingReport check(const std::vector<Triple>& claims, const KnowledgeGraph& graph);

/// The instructions embedded in every answer-phase prompt.
std::string_view protocol_instructions() noexcept;

}  // namespace kgchain::grounding
