#include "kgchain/kg_store.hpp"

#include <fstream>
#include <queue>

#include <nlohmann/json.hpp>

namespace kgchain {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

void require_valid(std::string_view value, const char* what) {
  if (!is_valid_name(value)) {
    throw std::invalid_argument(std::string("invalid ") + what + ": '" + std::string(value) + "'");
  }
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find('\t', start);
    fields.push_back(line.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return fields;
}

bool is_blank(std::string_view line) {
  for (char c : line) {
    if (!is_space(c)) return false;
  }
  return true;
}

Triple parse_tsv_line(const std::string& line, std::size_t number) {
  auto fields = split_tabs(line);
  if (fields.size() != 3) {
    throw GraphLoadError(number, line, "expected 3 tab-separated fields, got " + std::to_string(fields.size()));
  }
  for (const auto& f : fields) {
    if (!is_valid_name(f)) {
      throw GraphLoadError(number, line, "invalid name '" + f + "'");
    }
  }
  return Triple{EntityId(fields[0]), RelationName(fields[1]), EntityId(fields[2])};
}

Triple parse_jsonl_line(const std::string& line, std::size_t number) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw GraphLoadError(number, line, std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_object() || doc.size() != 3) {
    throw GraphLoadError(number, line, "expected an object with exactly the keys s, r, o");
  }
  std::string parts[3];
  const char* keys[3] = {"s", "r", "o"};
  for (int i = 0; i < 3; ++i) {
    auto it = doc.find(keys[i]);
    if (it == doc.end() || !it->is_string()) {
      throw GraphLoadError(number, line, std::string("missing string field '") + keys[i] + "'");
    }
    parts[i] = it->get<std::string>();
    if (!is_valid_name(parts[i])) {
      throw GraphLoadError(number, line, "invalid name '" + parts[i] + "'");
    }
  }
  return Triple{EntityId(parts[0]), RelationName(parts[1]), EntityId(parts[2])};
}

}  // namespace

bool is_valid_name(std::string_view text) noexcept {
  if (text.empty() || is_space(text.front()) || is_space(text.back())) return false;
  for (char c : text) {
    if (c == '\t' || c == '\n' || c == '\r') return false;
  }
  return true;
}

EntityId::EntityId(std::string value) : value_(std::move(value)) { require_valid(value_, "entity id"); }

RelationName::RelationName(std::string value) : value_(std::move(value)) {
  require_valid(value_, "relation name");
}

Triple make_triple(std::string subject, std::string relation, std::string object) {
  return Triple{EntityId(std::move(subject)), RelationName(std::move(relation)), EntityId(std::move(object))};
}

std::string to_evidence_line(const Triple& triple) {
  return triple.subject.str() + " | " + triple.relation.str() + " | " + triple.object.str();
}

GraphLoadError::GraphLoadError(std::size_t line_number, std::string line_content, const std::string& reason)
    : std::runtime_error("line " + std::to_string(line_number) + ": " + reason + ": '" + line_content + "'"),
      line(line_number),
      content(std::move(line_content)) {}

KnowledgeGraph::KnowledgeGraph(std::vector<Triple> triples) {
  for (auto& t : triples) triples_.insert(std::move(t));
  for (const auto& t : triples_) {
    entities_.insert(t.subject);
    entities_.insert(t.object);
    relations_.insert(t.relation);
    forward_[{t.subject.str(), t.relation.str()}].insert(t.object);
    inverse_[{t.object.str(), t.relation.str()}].insert(t.subject);
    incident_[t.subject].push_back(t);
    if (t.object != t.subject) incident_[t.object].push_back(t);
  }
}

Traversal KnowledgeGraph::follow(const EntitySet& sources, const RelationName& relation) const {
  Traversal out;
  for (const auto& s : sources) {
    auto it = forward_.find({s.str(), relation.str()});
    if (it == forward_.end()) continue;
    for (const auto& o : it->second) {
      out.entities.insert(o);
      out.evidence.insert(Triple{s, relation, o});
    }
  }
  return out;
}

Traversal KnowledgeGraph::follow_inverse(const EntitySet& sinks, const RelationName& relation) const {
  Traversal out;
  for (const auto& o : sinks) {
    auto it = inverse_.find({o.str(), relation.str()});
    if (it == inverse_.end()) continue;
    for (const auto& s : it->second) {
      out.entities.insert(s);
      out.evidence.insert(Triple{s, relation, o});
    }
  }
  return out;
}

TripleSet KnowledgeGraph::neighborhood(const EntityId& center, std::size_t hops) const {
  if (hops == 0) throw std::invalid_argument("neighborhood: hops must be >= 1");
  TripleSet out;
  if (!has_entity(center)) return out;

  std::set<EntityId> visited{center};
  std::vector<EntityId> frontier{center};
  for (std::size_t depth = 0; depth < hops && !frontier.empty(); ++depth) {
    std::vector<EntityId> next;
    for (const auto& node : frontier) {
      auto it = incident_.find(node);
      if (it == incident_.end()) continue;
      for (const auto& t : it->second) {
        out.insert(t);
        const EntityId& other = t.subject == node ? t.object : t.subject;
        if (visited.insert(other).second) next.push_back(other);
      }
    }
    frontier = std::move(next);
  }
  return out;
}

std::vector<RelationName> KnowledgeGraph::relation_sample(std::size_t limit) const {
  std::vector<RelationName> out;
  for (const auto& r : relations_) {
    if (out.size() >= limit) break;
    out.push_back(r);
  }
  return out;
}

KnowledgeGraph load_graph(std::istream& source, GraphFormat format) {
  std::vector<Triple> triples;
  std::string line;
  std::size_t number = 0;
  while (std::getline(source, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (is_blank(line)) continue;
    if (format == GraphFormat::tsv) {
      if (line.front() == '#') continue;
      triples.push_back(parse_tsv_line(line, number));
    } else {
      triples.push_back(parse_jsonl_line(line, number));
    }
  }
  return KnowledgeGraph(std::move(triples));
}

KnowledgeGraph load_graph_file(const std::string& path, GraphFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open graph file '" + path + "'");
  return load_graph(in, format);
}

GraphFormat parse_graph_format(std::string_view name) {
  if (name == "tsv") return GraphFormat::tsv;
  if (name == "jsonl" || name == "triples-jsonl") return GraphFormat::triples_jsonl;
  throw std::invalid_argument("unknown graph format '" + std::string(name) + "' (expected tsv or jsonl)");
}

}  // namespace kgchain
