#include "kgchain/llm_gateway.hpp"

#include <condition_variable>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

#include <openssl/evp.h>

#include "httplib.h"

#include <nlohmann/json.hpp>

#include "kgchain/prompt_markers.hpp"

namespace kgchain::llm {

using nlohmann::json;

namespace {

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr);
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return os.str();
}

std::string utc_timestamp() {
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

class InFlightGate {
 public:
  explicit InFlightGate(std::size_t cap) : cap_(cap) {}

  void acquire() {
    if (cap_ == 0) return;
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return active_ < cap_; });
    ++active_;
  }

  void release() {
    if (cap_ == 0) return;
    {
      std::lock_guard lock(mu_);
      --active_;
    }
    cv_.notify_one();
  }

 private:
  std::size_t cap_;
  std::size_t active_ = 0;
  std::mutex mu_;
  std::condition_variable cv_;
};

class OpenAiCompatibleProvider final : public Provider {
 public:
  explicit OpenAiCompatibleProvider(ProviderConfig config)
      : config_(std::move(config)), gate_(config_.max_in_flight) {
    split_base_url();
    if (const char* env = std::getenv(kCredentialEnvVar); env && *env) config_.credential = env;
  }

  std::string complete(const CompletionRequest& request) const override {
    request.check();
    json body = {
        {"model", request.model.empty() ? config_.model : request.model},
        {"messages", json::array()},
        {"temperature", request.temperature},
        {"max_tokens", request.max_tokens},
    };
    for (const auto& m : request.messages) {
      body["messages"].push_back({{"role", role_name(m.role)}, {"content", m.content}});
    }
    const std::string payload = body.dump();
    const std::string prompt_hash = sha256_hex(request.flattened());

    gate_.acquire();
    struct Release {
      InFlightGate& g;
      ~Release() { g.release(); }
    } release{gate_};

    httplib::Client client(host_);
    auto seconds = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
    auto micros = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - seconds);
    client.set_connection_timeout(seconds.count(), micros.count());
    client.set_read_timeout(seconds.count(), micros.count());
    client.set_write_timeout(seconds.count(), micros.count());

    httplib::Headers headers;
    if (!config_.credential.empty()) headers.emplace("Authorization", "Bearer " + config_.credential);

    const int total_attempts = config_.max_retries + 1;
    ErrorKind last_kind = ErrorKind::transport;
    std::string last_detail;
    int last_status = 0;

    for (int attempt = 0; attempt < total_attempts; ++attempt) {
      if (attempt > 0) std::this_thread::sleep_for(backoff_delay(config_.backoff_base, attempt - 1));

      auto started = std::chrono::steady_clock::now();
      auto res = client.Post(path_, headers, payload, "application/json");
      auto elapsed = std::chrono::steady_clock::now() - started;

      if (!res) {
        auto err = res.error();
        bool timed_out = err == httplib::Error::ConnectionTimeout ||
                         (err == httplib::Error::Read && elapsed >= config_.timeout);
        last_kind = timed_out ? ErrorKind::timeout : ErrorKind::transport;
        last_detail = httplib::to_string(err);
        last_status = 0;
        log(prompt_hash, payload, attempt + 1, 0, "", last_detail);
        continue;
      }

      log(prompt_hash, payload, attempt + 1, res->status, res->body, "");
      if (res->status == 429 || res->status >= 500) {
        last_kind = ErrorKind::http_status;
        last_status = res->status;
        last_detail = "HTTP " + std::to_string(res->status);
        continue;
      }
      if (res->status < 200 || res->status >= 300) {
        throw LlmError(ErrorKind::http_status, attempt + 1, "HTTP " + std::to_string(res->status) + ": " + res->body,
                       res->status);
      }
      return extract_content(res->body, attempt + 1);
    }
    throw LlmError(last_kind, total_attempts, last_detail, last_status);
  }

 private:
  static std::string extract_content(const std::string& body, int attempts) {
    json doc = json::parse(body, nullptr, false);
    if (doc.is_discarded()) throw LlmError(ErrorKind::bad_response, attempts, "response is not JSON");
    const json* content = nullptr;
    if (doc.contains("choices") && doc["choices"].is_array() && !doc["choices"].empty()) {
      const auto& first = doc["choices"][0];
      if (first.contains("message") && first["message"].is_object() && first["message"].contains("content")) {
        content = &first["message"]["content"];
      }
    }
    if (!content || !content->is_string() || content->get_ref<const std::string&>().empty()) {
      throw LlmError(ErrorKind::bad_response, attempts, "response has no choices[0].message.content");
    }
    return content->get<std::string>();
  }

  void split_base_url() {
    const std::string& url = config_.base_url;
    auto scheme_end = url.find("://");
    std::size_t host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
    auto path_start = url.find('/', host_start);
    host_ = url.substr(0, path_start);
    std::string prefix = path_start == std::string::npos ? "" : url.substr(path_start);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    path_ = prefix + "/chat/completions";
  }

  void log(const std::string& prompt_hash, const std::string& request, int attempt, int status,
           const std::string& response, const std::string& error) const {
    if (config_.transcript_path.empty()) return;
    json line = {{"time", utc_timestamp()}, {"prompt_sha256", prompt_hash}, {"attempt", attempt},
                 {"status", status},        {"request", request},           {"response", response}};
    if (!error.empty()) line["error"] = error;
    std::lock_guard lock(log_mu_);
    std::ofstream out(config_.transcript_path, std::ios::app);
    out << line.dump() << '\n';
  }

  ProviderConfig config_;
  std::string host_;
  std::string path_;
  mutable InFlightGate gate_;
  mutable std::mutex log_mu_;
};

class ScriptedProvider final : public Provider {
 public:
  ScriptedProvider(std::vector<ScriptEntry> script, std::string default_reply)
      : script_(std::move(script)), default_reply_(std::move(default_reply)) {}

  std::string complete(const CompletionRequest& request) const override {
    const std::string text = request.flattened();
    for (const auto& entry : script_) {
      if (text.find(entry.pattern) != std::string::npos) return entry.reply;
    }
    return default_reply_;
  }

 private:
  std::vector<ScriptEntry> script_;
  std::string default_reply_;
};

class OracleProvider final : public Provider {
 public:
  explicit OracleProvider(std::shared_ptr<const OracleTable> table) : table_(std::move(table)) {}

  std::string complete(const CompletionRequest& request) const override {
    std::string prompt;
    for (const auto& m : request.messages) {
      if (m.role == Role::user) prompt = m.content;
    }
    PromptKey key = classify_prompt(prompt);
    const std::map<std::string, std::string>* table = nullptr;
    switch (key.phase) {
      case PromptPhase::decompose:
        table = &table_->decompose;
        break;
      case PromptPhase::program:
        table = &table_->program;
        break;
      case PromptPhase::answer:
        table = &table_->answer;
        break;
      case PromptPhase::unknown:
        return table_->default_reply;
    }
    auto it = table->find(key.question);
    return it == table->end() ? table_->default_reply : it->second;
  }

 private:
  std::shared_ptr<const OracleTable> table_;
};

std::map<std::string, std::string> string_map(const json& doc, const char* key) {
  std::map<std::string, std::string> out;
  if (!doc.contains(key)) return out;
  for (const auto& [k, v] : doc.at(key).items()) out.emplace(k, v.get<std::string>());
  return out;
}

std::optional<std::string> line_value(std::string_view text, std::string_view prefix) {
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    std::string_view line = text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
    if (line.starts_with(prefix)) {
      line.remove_prefix(prefix.size());
      while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.remove_suffix(1);
      return std::string(line);
    }
    if (end == std::string_view::npos) break;
    pos = end + 1;
  }
  return std::nullopt;
}

}  // namespace

std::string_view role_name(Role role) noexcept {
  switch (role) {
    case Role::system:
      return "system";
    case Role::user:
      return "user";
    case Role::assistant:
      return "assistant";
  }
  return "user";
}

CompletionRequest CompletionRequest::from_prompt(std::string prompt, std::string model) {
  CompletionRequest r;
  r.messages.push_back({Role::user, std::move(prompt)});
  r.model = std::move(model);
  return r;
}

void CompletionRequest::check() const {
  bool has_user = false;
  for (const auto& m : messages) {
    if (m.role != Role::system && m.content.empty()) {
      throw std::invalid_argument("chat message content must be non-empty for user/assistant roles");
    }
    has_user = has_user || m.role == Role::user;
  }
  if (!has_user) throw std::invalid_argument("completion request needs at least one user message");
  if (!(temperature >= 0.0 && temperature <= 2.0)) throw std::invalid_argument("temperature must be in [0, 2]");
  if (max_tokens <= 0) throw std::invalid_argument("max_tokens must be positive");
}

std::string CompletionRequest::flattened() const {
  std::string out;
  for (const auto& m : messages) {
    out += role_name(m.role);
    out += ": ";
    out += m.content;
    out += '\n';
  }
  return out;
}

void ProviderConfig::check() const {
  if (max_retries < 0) throw std::invalid_argument("max_retries must be >= 0");
  switch (kind) {
    case ProviderKind::openai_compatible:
      if (base_url.empty()) throw std::invalid_argument("openai-compatible provider requires base_url");
      break;
    case ProviderKind::mock_oracle:
      if (!oracle) throw std::invalid_argument("mock-oracle provider requires an oracle table");
      break;
    case ProviderKind::mock_script:
      break;
  }
}

std::string_view error_kind_name(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::transport:
      return "transport";
    case ErrorKind::http_status:
      return "http-status";
    case ErrorKind::bad_response:
      return "bad-response";
    case ErrorKind::timeout:
      return "timeout";
  }
  return "?";
}

LlmError::LlmError(ErrorKind error_kind, int attempt_count, const std::string& detail, int status)
    : std::runtime_error(std::string(error_kind_name(error_kind)) + " error after " + std::to_string(attempt_count) +
                         " attempt(s): " + detail),
      kind(error_kind),
      attempts(attempt_count),
      http_status(status) {}

std::chrono::milliseconds backoff_delay(std::chrono::milliseconds base, int attempt) {
  return base * (std::int64_t{1} << std::min(attempt, 30));
}

ProviderHandle make_provider(const ProviderConfig& config) {
  config.check();
  switch (config.kind) {
    case ProviderKind::openai_compatible:
      return std::make_shared<OpenAiCompatibleProvider>(config);
    case ProviderKind::mock_script:
      return std::make_shared<ScriptedProvider>(config.script, config.default_reply);
    case ProviderKind::mock_oracle:
      return std::make_shared<OracleProvider>(config.oracle);
  }
  throw std::invalid_argument("unknown provider kind");
}

std::string complete(const ProviderConfig& config, const CompletionRequest& request) {
  return make_provider(config)->complete(request);
}

ProviderConfig make_scripted_provider(std::vector<ScriptEntry> script, std::string default_reply) {
  ProviderConfig c;
  c.kind = ProviderKind::mock_script;
  c.script = std::move(script);
  c.default_reply = std::move(default_reply);
  return c;
}

ProviderConfig make_oracle_provider(OracleTable table) {
  ProviderConfig c;
  c.kind = ProviderKind::mock_oracle;
  c.oracle = std::make_shared<const OracleTable>(std::move(table));
  return c;
}

OracleTable oracle_table_from_json(const json& doc) {
  OracleTable t;
  t.decompose = string_map(doc, "decompose");
  t.program = string_map(doc, "program");
  t.answer = string_map(doc, "answer");
  t.default_reply = doc.value("default_reply", std::string("I do not know."));
  return t;
}

OracleTable load_oracle_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open oracle table '" + path + "'");
  return oracle_table_from_json(json::parse(in));
}

PromptKey classify_prompt(std::string_view prompt) {
  if (prompt.find(prompts::kDecomposeMarker) != std::string_view::npos) {
    if (auto q = line_value(prompt, prompts::kQuestionPrefix)) return {PromptPhase::decompose, *q};
    return {};
  }
  if (auto q = line_value(prompt, prompts::kSubQuestionPrefix)) {
    bool program = prompt.find(prompts::kProgramFence) != std::string_view::npos;
    return {program ? PromptPhase::program : PromptPhase::answer, *q};
  }
  return {};
}

}  // namespace kgchain::llm
