#include "kgchain/run_config.hpp"

#include <fstream>
#include <initializer_list>
#include <set>

#include <nlohmann/json.hpp>

namespace kgchain {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError(where + " must be a JSON object");
  std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& [key, _] : obj.items()) {
    if (!keys.contains(key)) throw ConfigError("unknown config key '" + (where.empty() ? key : where + "." + key) + "'");
  }
}

template <typename T>
T get(const json& obj, const char* key, const std::string& where, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + where + "." + key + "' has the wrong type");
  }
}

std::string resolve(const std::filesystem::path& base, const std::string& path) {
  std::filesystem::path p(path);
  return (p.is_absolute() ? p : base / p).lexically_normal().string();
}

std::string existing(const std::filesystem::path& base, const std::string& path, const std::string& key) {
  std::string full = resolve(base, path);
  if (!std::filesystem::exists(full)) throw ConfigError("config key '" + key + "': path does not exist: " + full);
  return full;
}

llm::ProviderConfig provider_block(const json& p, const std::filesystem::path& base) {
  reject_unknown(p, "provider",
                 {"kind", "base_url", "credential", "model", "timeout_ms", "max_retries", "backoff_ms", "transcript",
                  "max_in_flight", "script", "default_reply", "oracle"});
  llm::ProviderConfig c;
  std::string kind = get<std::string>(p, "kind", "provider", "");
  if (kind == "openai-compatible") {
    c.kind = llm::ProviderKind::openai_compatible;
  } else if (kind == "mock-script") {
    c.kind = llm::ProviderKind::mock_script;
  } else if (kind == "mock-oracle") {
    c.kind = llm::ProviderKind::mock_oracle;
  } else {
    throw ConfigError("provider.kind must be openai-compatible, mock-script or mock-oracle");
  }
  c.base_url = get<std::string>(p, "base_url", "provider", "");
  c.credential = get<std::string>(p, "credential", "provider", "");
  c.model = get<std::string>(p, "model", "provider", "");
  c.timeout = std::chrono::milliseconds(get<long>(p, "timeout_ms", "provider", 30000));
  c.max_retries = get<int>(p, "max_retries", "provider", 2);
  c.backoff_base = std::chrono::milliseconds(get<long>(p, "backoff_ms", "provider", 500));
  if (p.contains("transcript")) c.transcript_path = resolve(base, get<std::string>(p, "transcript", "provider", ""));
  c.max_in_flight = get<std::size_t>(p, "max_in_flight", "provider", 0);
  c.default_reply = get<std::string>(p, "default_reply", "provider", "");

  if (p.contains("script")) {
    if (!p["script"].is_array()) throw ConfigError("provider.script must be an array");
    for (const auto& entry : p["script"]) {
      reject_unknown(entry, "provider.script[]", {"match", "reply"});
      c.script.push_back({get<std::string>(entry, "match", "provider.script[]", ""),
                          get<std::string>(entry, "reply", "provider.script[]", "")});
    }
  }
  if (p.contains("oracle")) {
    const auto& o = p["oracle"];
    try {
      if (o.is_string()) {
        c.oracle = std::make_shared<const llm::OracleTable>(
            llm::load_oracle_table(existing(base, o.get<std::string>(), "provider.oracle")));
      } else {
        reject_unknown(o, "provider.oracle", {"decompose", "program", "answer", "default_reply"});
        c.oracle = std::make_shared<const llm::OracleTable>(llm::oracle_table_from_json(o));
      }
    } catch (const json::exception& e) {
      throw ConfigError(std::string("provider.oracle: ") + e.what());
    }
  }
  try {
    c.check();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("provider: ") + e.what());
  }
  return c;
}

ChainConfig chain_block(const json& c) {
  reject_unknown(c, "chain", {"program_retries", "validation_retries", "fallback_hops", "code_module", "grounding"});
  ChainConfig out;
  out.program_retries = get<int>(c, "program_retries", "chain", out.program_retries);
  out.validation_retries = get<int>(c, "validation_retries", "chain", out.validation_retries);
  out.fallback_hops = get<int>(c, "fallback_hops", "chain", out.fallback_hops);
  out.code_module = get<bool>(c, "code_module", "chain", out.code_module);
  out.grounding = get<bool>(c, "grounding", "chain", out.grounding);
  try {
    out.check();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("chain: ") + e.what());
  }
  return out;
}

EvalBlock eval_block(const json& e, const std::filesystem::path& base) {
  reject_unknown(e, "eval", {"dataset", "dataset_name", "parallelism", "outcomes", "trace_dir", "report", "format"});
  EvalBlock out;
  if (!e.contains("dataset")) throw ConfigError("eval.dataset is required");
  out.dataset = existing(base, get<std::string>(e, "dataset", "eval", ""), "eval.dataset");
  out.dataset_name =
      get<std::string>(e, "dataset_name", "eval", std::filesystem::path(out.dataset).stem().string());
  out.parallelism = get<std::size_t>(e, "parallelism", "eval", 1);
  if (out.parallelism == 0) throw ConfigError("eval.parallelism must be positive");
  if (e.contains("outcomes")) out.outcomes_path = resolve(base, get<std::string>(e, "outcomes", "eval", ""));
  if (e.contains("trace_dir")) out.trace_dir = resolve(base, get<std::string>(e, "trace_dir", "eval", ""));
  if (e.contains("report")) out.report_path = resolve(base, get<std::string>(e, "report", "eval", ""));
  out.format = get<std::string>(e, "format", "eval", out.format);
  return out;
}

}  // namespace

RunConfig run_config_from_json(const json& doc, const std::filesystem::path& base) {
  reject_unknown(doc, "", {"graph", "graph_format", "provider", "chain", "eval"});
  RunConfig rc;
  if (doc.contains("graph")) rc.graph_path = existing(base, get<std::string>(doc, "graph", "", ""), "graph");
  try {
    rc.graph_format = parse_graph_format(get<std::string>(doc, "graph_format", "", "tsv"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (!doc.contains("provider")) throw ConfigError("config key 'provider' is required");
  rc.provider = provider_block(doc["provider"], base);
  if (doc.contains("chain")) rc.chain = chain_block(doc["chain"]);
  if (doc.contains("eval")) rc.eval = eval_block(doc["eval"], base);
  return rc;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw ConfigError("config '" + path + "' is not valid JSON");
  return run_config_from_json(doc, std::filesystem::absolute(path).parent_path());
}

}  // namespace kgchain
