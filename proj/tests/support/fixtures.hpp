#pragma once

#include <sstream>
#include <string>

#include "kgchain/eval_harness.hpp"
#include "kgchain/kg_store.hpp"
#include "kgchain/llm_gateway.hpp"

namespace kgchain::testing {

inline std::string data_path(const std::string& relative) { return std::string(KGCHAIN_DATA_DIR) + "/" + relative; }

/// A spouse B, B born_in C, A born_in C.
inline KnowledgeGraph tiny_graph() {
  std::istringstream in("A\tspouse\tB\nB\tborn_in\tC\nA\tborn_in\tC\n");
  return load_graph(in, GraphFormat::tsv);
}

inline KnowledgeGraph synthetic_graph() { return load_graph_file(data_path("synthetic/graph.tsv"), GraphFormat::tsv); }

/// Oracle-backed provider from a table under data/, e.g. "synthetic/oracle.json".
inline llm::ProviderHandle table_provider(const std::string& relative) {
  return llm::make_provider(llm::make_oracle_provider(llm::load_oracle_table(data_path(relative))));
}

inline std::vector<eval::QaRecord> dataset(const std::string& relative) {
  return eval::load_dataset_file(data_path(relative));
}

}  // namespace kgchain::testing
