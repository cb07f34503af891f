#include "kgchain/grounding.hpp"

#include <algorithm>
#include <optional>

namespace kgchain::grounding {

namespace {

constexpr std::string_view kClaimPrefix = "CLAIM:";
constexpr std::string_view kAnswerPrefix = "ANSWER:";

std::string_view trim(std::string_view s) {
  auto is_ws = [](char c) { return c == ' ' || c == '\t' || c == '\r'; };
  while (!s.empty() && is_ws(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_ws(s.back())) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::optional<Triple> parse_claim(std::string_view body) {
  auto fields = split(body, '|');
  if (fields.size() != 3) return std::nullopt;
  for (auto& f : fields) {
    f = trim(f);
    if (!is_valid_name(f)) return std::nullopt;
  }
  return make_triple(std::string(fields[0]), std::string(fields[1]), std::string(fields[2]));
}

}  // namespace

ClaimExtraction extract(std::string_view reply) {
  ClaimExtraction out;
  auto append_remainder = [&](std::string_view line) {
    if (!out.remainder.empty()) out.remainder.push_back('\n');
    out.remainder.append(line);
  };

  for (std::string_view raw : split(reply, '\n')) {
    std::string_view line = trim(raw);
    if (line.starts_with(kClaimPrefix)) {
      if (auto claim = parse_claim(line.substr(kClaimPrefix.size()))) {
        out.claims.push_back(std::move(*claim));
        continue;
      }
    } else if (line.starts_with(kAnswerPrefix)) {
      for (auto piece : split(line.substr(kAnswerPrefix.size()), ',')) {
        piece = trim(piece);
        if (!is_valid_name(piece)) continue;
        EntityId answer{std::string(piece)};
        if (std::find(out.answers.begin(), out.answers.end(), answer) == out.answers.end()) {
          out.answers.push_back(std::move(answer));
        }
      }
      continue;
    }
    append_remainder(raw);
  }
  return out;
}

GroundingReport check(const std::vector<Triple>& claims, const KnowledgeGraph& graph) {
  GroundingReport report;
  for (const auto& c : claims) {
    (graph.contains(c) ? report.grounded : report.ungrounded).push_back(c);
  }
  return report;
}

std::string_view protocol_instructions() noexcept {
  return "State each fact you rely on as a line `CLAIM: subject | relation | object`.\n"
         "Finish with one line `ANSWER: entity, entity` listing the answer entities, best first.";
}

}  // namespace kgchain::grounding
