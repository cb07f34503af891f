#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <istream>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "kgchain/chain_executor.hpp"

namespace kgchain::eval {

struct QaRecord {
  std::string id;
  std::string question;
  std::vector<std::string> answers;  // gold, non-empty

  friend bool operator==(const QaRecord&, const QaRecord&) = default;
};

struct DatasetError : std::runtime_error {
  DatasetError(std::size_t line, const std::string& message);
  std::size_t line;
};

/// JSONL, one `{"id", "question", "answers"}` object per line; blank lines skipped.
std::vector<QaRecord> load_dataset(std::istream& source);
std::vector<QaRecord> load_dataset_file(const std::string& path);

/// Lowercase, trim, collapse internal whitespace runs to one space.
std::string normalize_answer(std::string_view text);

/// 1 iff a normalized prediction among the first k equals a normalized gold answer.
int hit_at_k(const std::vector<std::string>& predictions, const std::vector<std::string>& gold, std::size_t k);

/// A percentage held as an integer count of hundredths, so reports are exact.
class Percent {
 public:
  constexpr Percent() = default;
  static constexpr Percent from_hundredths(std::int64_t h) {
    Percent p;
    p.hundredths_ = h;
    return p;
  }

  /// 100 * hits / total, rounded half-up to two decimals.
  static Percent from_ratio(std::size_t hits, std::size_t total);
  /// Arithmetic mean, rounded half-up to two decimals.
  static Percent mean(std::span<const Percent> values);
  static Percent parse(std::string_view text);

  std::int64_t hundredths() const noexcept { return hundredths_; }
  double value() const noexcept { return static_cast<double>(hundredths_) / 100.0; }
  std::string str() const;

  friend auto operator<=>(const Percent&, const Percent&) = default;

 private:
  std::int64_t hundredths_ = 0;
};

struct EvalOutcome {
  std::string record_id;
  std::vector<std::string> predictions;
  int hit1 = 0;
  int hit3 = 0;
  int hit5 = 0;
  bool failed = false;
  bool provider_error = false;  // failure came from the model gateway
  std::string error;
  std::optional<ChainTrace> trace;
  std::string trace_path;
};

nlohmann::json outcome_to_json(const EvalOutcome& outcome);

struct MetricsReport {
  std::string dataset;
  std::string config;
  Percent hit1;
  Percent hit3;
  Percent hit5;
  std::size_t records = 0;
  std::size_t failed = 0;

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

/// Folds outcomes in record-id order; independent of completion order.
MetricsReport aggregate(std::string dataset, std::string config, std::vector<EvalOutcome> outcomes);

struct EvalOptions {
  std::string dataset_name = "dataset";
  std::size_t parallelism = 1;
  bool keep_traces = true;
  /// Called once per record as it completes, serialized by the harness.
  std::function<void(EvalOutcome&)> on_outcome;
};

struct EvalRun {
  MetricsReport report;
  std::vector<EvalOutcome> outcomes;  // record-id order
};

/// decompose -> run_chain -> HIT@{1,3,5} per record. Records whose chain
/// throws are counted as failed misses. Throws std::invalid_argument for
/// an empty dataset.
EvalRun run_eval(const llm::Provider& provider, const KnowledgeGraph& graph, const std::vector<QaRecord>& dataset,
                 const ChainConfig& config, const EvalOptions& options = {});

enum class ReportFormat { csv, json, markdown };

ReportFormat parse_report_format(std::string_view name);

/// Per-config cross-dataset averages for configs with two or more rows.
std::vector<MetricsReport> average_rows(const std::vector<MetricsReport>& reports);

std::string emit_report(const std::vector<MetricsReport>& reports, ReportFormat format);

/// Reads back the data rows (not the averages) of a csv or json report.
std::vector<MetricsReport> parse_report(std::string_view text, ReportFormat format);

}  // namespace kgchain::eval
