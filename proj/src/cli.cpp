#include "kgchain/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>

#include "CLI11.hpp"
#include <nlohmann/json.hpp>

#include "kgchain/chain_executor.hpp"
#include "kgchain/decomposer.hpp"
#include "kgchain/eval_harness.hpp"
#include "kgchain/run_config.hpp"

namespace kgchain::cli {

namespace {

using nlohmann::json;

KnowledgeGraph graph_for(const RunConfig& rc) {
  if (!rc.graph_path) return KnowledgeGraph{};
  return load_graph_file(*rc.graph_path, rc.graph_format);
}

llm::ProviderHandle provider_for(const RunConfig& rc) {
  try {
    return llm::make_provider(rc.provider);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("provider: ") + e.what());
  }
}

std::string slug(std::string_view label) {
  std::string out;
  for (char c : label) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else if (!out.empty() && out.back() != '-') {
      out.push_back('-');
    }
  }
  while (!out.empty() && out.back() == '-') out.pop_back();
  return out;
}

int cmd_ingest(const std::string& path, const std::string& format, std::ostream& out, std::ostream& err) {
  try {
    auto graph = load_graph_file(path, parse_graph_format(format));
    out << graph.size() << " triples, " << graph.entities().size() << " entities, " << graph.relations().size()
        << " relations\n";
    return kOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kGeneric;
  }
}

int cmd_ask(const std::string& config_path, const std::string& question, const std::string& trace_path,
            std::ostream& out) {
  RunConfig rc = load_run_config(config_path);
  auto graph = graph_for(rc);
  auto provider = provider_for(rc);
  ChainConfig chain = rc.chain;
  if (!rc.graph_path) chain.code_module = false;

  auto plan = decompose(*provider, question, graph.relation_sample(kMaxRelationSample));
  ChainTrace trace = run_chain(*provider, graph, plan, chain);

  if (trace.final_answers.empty()) out << "(no answer)\n";
  for (std::size_t i = 0; i < trace.final_answers.size(); ++i) {
    out << i + 1 << ". " << trace.final_answers[i].entity.str() << " (support=" << trace.final_answers[i].support
        << ")\n";
  }
  if (!trace_path.empty()) {
    std::ofstream f(trace_path);
    if (!f) throw std::runtime_error("cannot write trace '" + trace_path + "'");
    f << trace_to_json(trace).dump(2) << "\n";
  }
  return kOk;
}

int cmd_eval(const std::string& config_path, bool baseline, bool enhanced, const std::string& out_path,
             const std::string& format_flag, std::ostream& out, std::ostream& err) {
  RunConfig rc = load_run_config(config_path);
  if (!rc.eval) throw ConfigError("config has no 'eval' block");
  const EvalBlock& eb = *rc.eval;
  eval::ReportFormat format;
  try {
    format = eval::parse_report_format(format_flag.empty() ? eb.format : format_flag);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }

  auto graph = graph_for(rc);
  auto provider = provider_for(rc);
  auto dataset = eval::load_dataset_file(eb.dataset);
  if (dataset.empty()) {
    err << "error: dataset '" << eb.dataset << "' has no records\n";
    return kGeneric;
  }

  std::vector<ChainConfig> runs;
  if (baseline) {
    ChainConfig c = rc.chain;
    c.code_module = false;
    c.grounding = false;
    runs.push_back(c);
  }
  if (enhanced) {
    ChainConfig c = rc.chain;
    c.code_module = rc.graph_path.has_value();
    c.grounding = true;
    runs.push_back(c);
  }

  std::ofstream sidecar;
  if (!eb.outcomes_path.empty()) {
    sidecar.open(eb.outcomes_path, std::ios::trunc);
    if (!sidecar) throw std::runtime_error("cannot write outcomes '" + eb.outcomes_path + "'");
  }

  std::vector<eval::MetricsReport> reports;
  std::size_t provider_failures = 0, total = 0;
  for (const auto& chain : runs) {
    eval::EvalOptions opts;
    opts.dataset_name = eb.dataset_name;
    opts.parallelism = eb.parallelism;
    opts.keep_traces = false;
    std::filesystem::path trace_dir;
    if (!eb.trace_dir.empty()) {
      trace_dir = std::filesystem::path(eb.trace_dir) / slug(chain.label());
      std::filesystem::create_directories(trace_dir);
      opts.keep_traces = true;
    }
    const std::string label = chain.label();
    opts.on_outcome = [&](eval::EvalOutcome& o) {
      if (o.trace && !trace_dir.empty()) {
        auto path = trace_dir / (o.record_id + ".json");
        std::ofstream f(path);
        f << trace_to_json(*o.trace).dump(2) << "\n";
        o.trace_path = path.string();
      }
      if (sidecar.is_open()) {
        json line = eval::outcome_to_json(o);
        line["config"] = label;
        sidecar << line.dump() << "\n";
        sidecar.flush();
      }
    };
    auto run = eval::run_eval(*provider, graph, dataset, chain, opts);
    for (const auto& o : run.outcomes) provider_failures += o.provider_error ? 1 : 0;
    total += run.outcomes.size();
    reports.push_back(run.report);
  }

  const std::string text = eval::emit_report(reports, format);
  std::string target = out_path.empty() ? eb.report_path : out_path;
  if (target.empty()) {
    out << text;
  } else {
    std::ofstream f(target);
    if (!f) throw std::runtime_error("cannot write report '" + target + "'");
    f << text;
  }
  if (provider_failures == total) {
    err << "error: every record failed with a provider error\n";
    return kProvider;
  }
  return kOk;
}

int cmd_trace(const std::string& path, std::ostream& out) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trace '" + path + "'");
  out << render_trace(trace_from_json(json::parse(in)));
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Knowledge-graph grounded question answering with kgql traversal programs", "kgchain"};
  app.require_subcommand(1);

  std::string ingest_path, ingest_format = "tsv";
  auto* ingest = app.add_subcommand("ingest", "Load a graph and print its size");
  ingest->add_option("path", ingest_path, "Graph file")->required();
  ingest->add_option("--format", ingest_format, "tsv or jsonl")->check(CLI::IsMember({"tsv", "jsonl"}));

  std::string config_path, question, trace_path;
  auto* ask = app.add_subcommand("ask", "Answer one question");
  ask->add_option("--config", config_path, "Run config (JSON)")->required();
  ask->add_option("question", question, "Question text")->required();
  ask->add_option("--trace", trace_path, "Write the chain trace JSON here");

  std::string eval_config, out_path, report_format;
  bool baseline = false, enhanced = false, both = false;
  auto* ev = app.add_subcommand("eval", "Evaluate HIT@1/3/5 over the configured dataset");
  ev->add_option("--config", eval_config, "Run config (JSON)")->required();
  auto* fb = ev->add_flag("--baseline", baseline, "Code module off");
  auto* fe = ev->add_flag("--enhanced", enhanced, "Code module on");
  auto* fboth = ev->add_flag("--both", both, "Baseline then enhanced");
  fb->excludes(fe)->excludes(fboth);
  fe->excludes(fboth);
  ev->add_option("--out", out_path, "Report path (default: stdout)");
  ev->add_option("--format", report_format, "csv, json or markdown")
      ->check(CLI::IsMember({"csv", "json", "markdown"}));

  std::string trace_file;
  auto* tr = app.add_subcommand("trace", "Pretty-print a stored chain trace");
  tr->add_option("trace-file", trace_file, "Trace JSON")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
    if (ev->parsed() && !baseline && !enhanced && !both) {
      throw CLI::ValidationError("eval", "one of --baseline, --enhanced, --both is required");
    }
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kGeneric;
  }

  try {
    if (ingest->parsed()) return cmd_ingest(ingest_path, ingest_format, out, err);
    if (ask->parsed()) return cmd_ask(config_path, question, trace_path, out);
    if (ev->parsed()) return cmd_eval(eval_config, baseline || both, enhanced || both, out_path, report_format, out, err);
    if (tr->parsed()) return cmd_trace(trace_file, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const llm::LlmError& e) {
    err << "provider error: " << e.what() << "\n";
    return kProvider;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kGeneric;
  }
  return kGeneric;
}

}  // namespace kgchain::cli
