#pragma once

#include <chrono>
#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace kgchain::llm {

enum class Role { system, user, assistant };

std::string_view role_name(Role role) noexcept;

struct ChatMessage {
  Role role;
  std::string content;
};

struct CompletionRequest {
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  int max_tokens = 1024;
  std::string model;

  /// Single user message request with the default decoding settings.
  static CompletionRequest from_prompt(std::string prompt, std::string model = {});

  /// Throws std::invalid_argument when the request breaks its invariants.
  void check() const;

  /// Messages joined as `role: content` lines; what mock matchers search.
  std::string flattened() const;
};

enum class ProviderKind { openai_compatible, mock_script, mock_oracle };

struct ScriptEntry {
  std::string pattern;  // literal substring
  std::string reply;
};

/// Replies authored alongside a fixture, keyed by the question text the
/// prompt carries. Decomposition prompts are keyed by their `Question:`
/// line; step prompts by their `Sub-question:` line, split into program
/// (code module) and answer (plain text) phases.
struct OracleTable {
  std::map<std::string, std::string> decompose;
  std::map<std::string, std::string> program;
  std::map<std::string, std::string> answer;
  std::string default_reply;
};

OracleTable oracle_table_from_json(const nlohmann::json& doc);
OracleTable load_oracle_table(const std::string& path);

struct ProviderConfig {
  ProviderKind kind = ProviderKind::mock_script;

  // openai-compatible
  std::string base_url;
  std::string credential;
  std::string model;
  std::chrono::milliseconds timeout{30000};
  int max_retries = 2;
  std::chrono::milliseconds backoff_base{500};
  std::string transcript_path;  // append-only JSONL, empty disables
  std::size_t max_in_flight = 0;  // 0 = unlimited

  // mock-script
  std::vector<ScriptEntry> script;
  std::string default_reply;

  // mock-oracle
  std::shared_ptr<const OracleTable> oracle;

  /// Throws std::invalid_argument when the config breaks its invariants.
  void check() const;
};

enum class ErrorKind { transport, http_status, bad_response, timeout };

std::string_view error_kind_name(ErrorKind kind) noexcept;

struct LlmError : std::runtime_error {
  LlmError(ErrorKind kind, int attempts, const std::string& detail, int http_status = 0);

  ErrorKind kind;
  int attempts;
  int http_status;
};

/// Delay before retry number `attempt` (0-based): base * 2^attempt.
std::chrono::milliseconds backoff_delay(std::chrono::milliseconds base, int attempt);

class Provider {
 public:
  virtual ~Provider() = default;

  /// Returns the assistant message content. Safe to call concurrently.
  virtual std::string complete(const CompletionRequest& request) const = 0;
};

using ProviderHandle = std::shared_ptr<const Provider>;

ProviderHandle make_provider(const ProviderConfig& config);

std::string complete(const ProviderConfig& config, const CompletionRequest& request);

ProviderConfig make_scripted_provider(std::vector<ScriptEntry> script, std::string default_reply);

ProviderConfig make_oracle_provider(OracleTable table);

/// Wraps a callable; used by tests that need stateful or randomized replies.
class FunctionProvider final : public Provider {
 public:
  using Fn = std::function<std::string(const CompletionRequest&)>;

  explicit FunctionProvider(Fn fn) : fn_(std::move(fn)) {}

  std::string complete(const CompletionRequest& request) const override { return fn_(request); }

 private:
  Fn fn_;
};

/// Which part of the pipeline a prompt belongs to, recognized from the
/// fixed templates. Used by the oracle mock.
enum class PromptPhase { decompose, program, answer, unknown };

struct PromptKey {
  PromptPhase phase = PromptPhase::unknown;
  std::string question;
};

PromptKey classify_prompt(std::string_view prompt);

/// Environment variable that overrides the configured credential.
inline constexpr const char* kCredentialEnvVar = "KGCHAIN_API_KEY";

}  // namespace kgchain::llm
