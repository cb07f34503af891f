#include "kgchain/eval_harness.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "kgchain/decomposer.hpp"

namespace kgchain::eval {

using nlohmann::json;

namespace {

std::int64_t rounded_half_up(std::int64_t numerator, std::int64_t denominator) {
  return (2 * numerator + denominator) / (2 * denominator);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  return out + "\"";
}

std::vector<std::string> csv_split(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

json report_json(const MetricsReport& r) {
  return {{"dataset", r.dataset}, {"config", r.config},   {"hit@1", r.hit1.value()}, {"hit@3", r.hit3.value()},
          {"hit@5", r.hit5.value()}, {"records", r.records}, {"failed", r.failed}};
}

Percent percent_from_json(const json& j) {
  return Percent::from_hundredths(static_cast<std::int64_t>(std::llround(j.get<double>() * 100.0)));
}

}  // namespace

DatasetError::DatasetError(std::size_t line_number, const std::string& message)
    : std::runtime_error("line " + std::to_string(line_number) + ": " + message), line(line_number) {}

std::vector<QaRecord> load_dataset(std::istream& source) {
  std::vector<QaRecord> out;
  std::set<std::string> ids;
  std::string line;
  std::size_t number = 0;
  while (std::getline(source, line)) {
    ++number;
    if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); })) continue;
    json doc = json::parse(line, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) throw DatasetError(number, "malformed JSON record");
    QaRecord r;
    try {
      r.id = doc.at("id").get<std::string>();
      r.question = doc.at("question").get<std::string>();
      r.answers = doc.at("answers").get<std::vector<std::string>>();
    } catch (const json::exception& e) {
      throw DatasetError(number, std::string("bad record: ") + e.what());
    }
    if (r.id.empty()) throw DatasetError(number, "empty id");
    if (r.question.empty()) throw DatasetError(number, "record '" + r.id + "' has an empty question");
    if (r.answers.empty()) throw DatasetError(number, "record '" + r.id + "' has no gold answers");
    if (!ids.insert(r.id).second) throw DatasetError(number, "duplicate id '" + r.id + "'");
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<QaRecord> load_dataset_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset '" + path + "'");
  return load_dataset(in);
}

std::string normalize_answer(std::string_view text) {
  std::string out;
  bool pending_space = false;
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

int hit_at_k(const std::vector<std::string>& predictions, const std::vector<std::string>& gold, std::size_t k) {
  if (k == 0) throw std::invalid_argument("hit_at_k: k must be >= 1");
  std::set<std::string> targets;
  for (const auto& g : gold) targets.insert(normalize_answer(g));
  const std::size_t n = std::min(k, predictions.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (targets.contains(normalize_answer(predictions[i]))) return 1;
  }
  return 0;
}

Percent Percent::from_ratio(std::size_t hits, std::size_t total) {
  if (total == 0) throw std::invalid_argument("percentage over zero records");
  return from_hundredths(rounded_half_up(static_cast<std::int64_t>(hits) * 10000, static_cast<std::int64_t>(total)));
}

Percent Percent::mean(std::span<const Percent> values) {
  if (values.empty()) throw std::invalid_argument("mean of no percentages");
  std::int64_t sum = 0;
  for (const auto& v : values) sum += v.hundredths_;
  return from_hundredths(rounded_half_up(sum, static_cast<std::int64_t>(values.size())));
}

Percent Percent::parse(std::string_view text) {
  auto dot = text.find('.');
  std::string whole(text.substr(0, dot));
  std::string frac = dot == std::string_view::npos ? "" : std::string(text.substr(dot + 1));
  if (whole.empty() || frac.size() > 2 || !std::all_of(whole.begin(), whole.end(), ::isdigit) ||
      !std::all_of(frac.begin(), frac.end(), ::isdigit)) {
    throw std::invalid_argument("bad percentage '" + std::string(text) + "'");
  }
  while (frac.size() < 2) frac.push_back('0');
  return from_hundredths(std::stoll(whole) * 100 + std::stoll(frac));
}

std::string Percent::str() const {
  std::int64_t whole = hundredths_ / 100;
  std::int64_t frac = hundredths_ % 100;
  return std::to_string(whole) + "." + (frac < 10 ? "0" : "") + std::to_string(frac);
}

json outcome_to_json(const EvalOutcome& o) {
  json j = {{"id", o.record_id}, {"predictions", o.predictions}, {"hit@1", o.hit1}, {"hit@3", o.hit3},
            {"hit@5", o.hit5},   {"failed", o.failed}};
  if (!o.error.empty()) j["error"] = o.error;
  if (!o.trace_path.empty()) j["trace"] = o.trace_path;
  return j;
}

MetricsReport aggregate(std::string dataset, std::string config, std::vector<EvalOutcome> outcomes) {
  std::sort(outcomes.begin(), outcomes.end(),
            [](const EvalOutcome& a, const EvalOutcome& b) { return a.record_id < b.record_id; });
  MetricsReport r;
  r.dataset = std::move(dataset);
  r.config = std::move(config);
  r.records = outcomes.size();
  std::size_t h1 = 0, h3 = 0, h5 = 0;
  for (const auto& o : outcomes) {
    h1 += o.hit1;
    h3 += o.hit3;
    h5 += o.hit5;
    r.failed += o.failed ? 1 : 0;
  }
  r.hit1 = Percent::from_ratio(h1, r.records);
  r.hit3 = Percent::from_ratio(h3, r.records);
  r.hit5 = Percent::from_ratio(h5, r.records);
  return r;
}

EvalRun run_eval(const llm::Provider& provider, const KnowledgeGraph& graph, const std::vector<QaRecord>& dataset,
                 const ChainConfig& config, const EvalOptions& options) {
  if (dataset.empty()) throw std::invalid_argument("refusing to report on an empty dataset");
  config.check();

  const auto relations = graph.relation_sample(kMaxRelationSample);
  std::vector<EvalOutcome> outcomes(dataset.size());
  std::atomic<std::size_t> next{0};
  std::mutex sink_mu;

  auto evaluate = [&](const QaRecord& record) {
    EvalOutcome o;
    o.record_id = record.id;
    try {
      auto plan = decompose(provider, record.question, relations);
      ChainTrace trace = run_chain(provider, graph, plan, config);
      for (const auto& a : trace.final_answers) o.predictions.push_back(a.entity.str());
      o.hit1 = hit_at_k(o.predictions, record.answers, 1);
      o.hit3 = hit_at_k(o.predictions, record.answers, 3);
      o.hit5 = hit_at_k(o.predictions, record.answers, 5);
      if (options.keep_traces) o.trace = std::move(trace);
    } catch (const llm::LlmError& e) {
      o.predictions.clear();
      o.hit1 = o.hit3 = o.hit5 = 0;
      o.failed = true;
      o.provider_error = true;
      o.error = e.what();
    } catch (const std::exception& e) {
      o.predictions.clear();
      o.hit1 = o.hit3 = o.hit5 = 0;
      o.failed = true;
      o.error = e.what();
    }
    return o;
  };

  auto worker = [&] {
    for (std::size_t i = next++; i < dataset.size(); i = next++) {
      EvalOutcome o = evaluate(dataset[i]);
      if (options.on_outcome) {
        std::lock_guard lock(sink_mu);
        options.on_outcome(o);
      }
      outcomes[i] = std::move(o);
    }
  };

  const std::size_t threads = std::clamp<std::size_t>(options.parallelism, 1, dataset.size());
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  EvalRun run;
  run.report = aggregate(options.dataset_name, config.label(), outcomes);
  std::sort(outcomes.begin(), outcomes.end(),
            [](const EvalOutcome& a, const EvalOutcome& b) { return a.record_id < b.record_id; });
  run.outcomes = std::move(outcomes);
  return run;
}

ReportFormat parse_report_format(std::string_view name) {
  if (name == "csv") return ReportFormat::csv;
  if (name == "json") return ReportFormat::json;
  if (name == "markdown" || name == "md") return ReportFormat::markdown;
  throw std::invalid_argument("unknown report format '" + std::string(name) + "' (expected csv, json or markdown)");
}

std::vector<MetricsReport> average_rows(const std::vector<MetricsReport>& reports) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<const MetricsReport*>> groups;
  for (const auto& r : reports) {
    if (!groups.contains(r.config)) order.push_back(r.config);
    groups[r.config].push_back(&r);
  }
  std::vector<MetricsReport> out;
  for (const auto& config : order) {
    const auto& rows = groups[config];
    if (rows.size() < 2) continue;
    std::vector<Percent> h1, h3, h5;
    MetricsReport avg;
    avg.dataset = "Average";
    avg.config = config;
    for (const auto* r : rows) {
      h1.push_back(r->hit1);
      h3.push_back(r->hit3);
      h5.push_back(r->hit5);
      avg.records += r->records;
      avg.failed += r->failed;
    }
    avg.hit1 = Percent::mean(h1);
    avg.hit3 = Percent::mean(h3);
    avg.hit5 = Percent::mean(h5);
    out.push_back(std::move(avg));
  }
  return out;
}

std::string emit_report(const std::vector<MetricsReport>& reports, ReportFormat format) {
  if (reports.empty()) throw std::invalid_argument("emit_report: no reports");
  const auto averages = average_rows(reports);
  std::ostringstream os;
  switch (format) {
    case ReportFormat::markdown:
      os << "| Dataset | Model | HIT@1 | HIT@3 | HIT@5 |\n";
      os << "|---|---|---:|---:|---:|\n";
      for (const auto* rows : {&reports, &averages}) {
        for (const auto& r : *rows) {
          os << "| " << r.dataset << " | " << r.config << " | " << r.hit1.str() << " | " << r.hit3.str() << " | "
             << r.hit5.str() << " |\n";
        }
      }
      break;
    case ReportFormat::csv:
      os << "row,dataset,config,hit@1,hit@3,hit@5,records,failed\n";
      for (const auto* rows : {&reports, &averages}) {
        const char* kind = rows == &reports ? "data" : "average";
        for (const auto& r : *rows) {
          os << kind << ',' << csv_field(r.dataset) << ',' << csv_field(r.config) << ',' << r.hit1.str() << ','
             << r.hit3.str() << ',' << r.hit5.str() << ',' << r.records << ',' << r.failed << '\n';
        }
      }
      break;
    case ReportFormat::json: {
      json doc = {{"reports", json::array()}, {"averages", json::array()}};
      for (const auto& r : reports) doc["reports"].push_back(report_json(r));
      for (const auto& r : averages) doc["averages"].push_back(report_json(r));
      os << doc.dump(2) << '\n';
      break;
    }
  }
  return os.str();
}

std::vector<MetricsReport> parse_report(std::string_view text, ReportFormat format) {
  std::vector<MetricsReport> out;
  if (format == ReportFormat::json) {
    json doc = json::parse(text);
    for (const auto& j : doc.at("reports")) {
      out.push_back({j.at("dataset").get<std::string>(), j.at("config").get<std::string>(),
                     percent_from_json(j.at("hit@1")), percent_from_json(j.at("hit@3")),
                     percent_from_json(j.at("hit@5")), j.at("records").get<std::size_t>(),
                     j.at("failed").get<std::size_t>()});
    }
    return out;
  }
  if (format != ReportFormat::csv) throw std::invalid_argument("parse_report supports csv and json only");
  std::istringstream in{std::string(text)};
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = csv_split(line);
    if (f.size() != 8) throw std::invalid_argument("bad csv report row: " + line);
    if (f[0] != "data") continue;
    out.push_back({f[1], f[2], Percent::parse(f[3]), Percent::parse(f[4]), Percent::parse(f[5]),
                   static_cast<std::size_t>(std::stoull(f[6])), static_cast<std::size_t>(std::stoull(f[7]))});
  }
  return out;
}

}  // namespace kgchain::eval
