#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "kgchain/chain_executor.hpp"
#include "kgchain/kg_store.hpp"
#include "kgchain/llm_gateway.hpp"

namespace kgchain {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EvalBlock {
  std::string dataset;
  std::string dataset_name;
  std::size_t parallelism = 1;
  std::string outcomes_path;  // JSONL sidecar, optional
  std::string trace_dir;      // one ChainTrace JSON per record, optional
  std::string report_path;    // stdout when empty
  std::string format = "markdown";
};

/// JSON run configuration. Relative paths resolve against the config
/// file's directory; unknown keys are rejected.
struct RunConfig {
  std::optional<std::string> graph_path;
  GraphFormat graph_format = GraphFormat::tsv;
  llm::ProviderConfig provider;
  ChainConfig chain;
  std::optional<EvalBlock> eval;
};

RunConfig run_config_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::string& path);

}  // namespace kgchain
