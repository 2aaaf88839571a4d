#pragma once

#include <atomic>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <vector>

#include "sqlink/catalog.hpp"
#include "sqlink/types.hpp"

// Database-level schema linking and SQL generation through an external
// chat-completions endpoint, with deterministic prompts, robust response
// parsing, and a scriptable mock client for hermetic runs.
namespace sqlink {

struct LlmClientConfig {
  std::string endpoint_url;  // full URL of the chat-completions endpoint
  std::string model = "default";
  double temperature = 0.0;
  int max_tokens = 1024;
  int timeout_seconds = 60;
  int retries = 2;              // transport retries
  double backoff_seconds = 0.5;
  int max_concurrency = 4;      // in-flight request bound
  std::string auth_env = "LLM_API_KEY";
};

class LlmClient {
 public:
  virtual ~LlmClient() = default;
  // Returns the assistant message content. Throws ClientError on transport
  // failure after retries.
  virtual std::string complete(const std::string& prompt) = 0;
};

class HttpLlmClient final : public LlmClient {
 public:
  explicit HttpLlmClient(LlmClientConfig config);
  std::string complete(const std::string& prompt) override;

 private:
  LlmClientConfig config_;
  std::counting_semaphore<> in_flight_;
};

// Scripted client: response text per request ordinal, for hermetic tests
// and offline runs. The script file holds either a JSON array of strings or
// an object keyed by the ordinal ("0", "1", ...).
class MockLlmClient final : public LlmClient {
 public:
  explicit MockLlmClient(std::vector<std::string> responses);
  MockLlmClient(MockLlmClient&& other) noexcept
      : responses_(std::move(other.responses_)), next_(other.next_.load()) {}
  static MockLlmClient from_script_file(const std::string& path);

  std::string complete(const std::string& prompt) override;
  int calls() const { return next_.load(); }

 private:
  std::vector<std::string> responses_;
  std::atomic<int> next_{0};
};

struct LinkInstruction {
  std::string prompt;
};

// Fixed instruction block + ddl schema + evidence (omitted when empty) +
// question + the JSON output contract. Byte-deterministic.
LinkInstruction build_link_instruction(const SchemaCatalog& catalog,
                                       const std::string& evidence,
                                       const std::string& question);

// First JSON object found in `text`, names resolved case-insensitively.
// Unknown names are dropped and counted. Throws UnparseableResponseError
// when no JSON object can be extracted.
struct LinkParse {
  SchemaSet set;
  int dropped_names = 0;
};
LinkParse parse_link_response(const std::string& text, const SchemaCatalog& catalog);

// build -> call -> parse, retrying unparseable responses. After exhausting
// retries the result is the empty set with the error recorded.
struct LinkOutcome {
  SchemaSet set;
  int attempts = 1;
  int dropped_names = 0;
  std::optional<std::string> error;
};
LinkOutcome link_database_level(LlmClient& client, const Instance& instance,
                                const SchemaCatalog& catalog, int retries);

// Prompt over subset_catalog(catalog, d_f). Throws PreconditionError when
// d_f is empty.
std::string build_generation_prompt(const SchemaSet& d_f,
                                    const SchemaCatalog& catalog,
                                    const std::string& evidence,
                                    const std::string& question);

struct GenerationResult {
  std::string sql_text;      // extracted SQL, trailing semicolon stripped
  std::string raw_response;
  bool unparseable = false;  // no SQL found, or sql_text fails to parse
  double duration_ms = 0.0;
  int attempts = 1;
};

GenerationResult generate_sql(LlmClient& client, const Instance& instance,
                              const SchemaSet& d_f, const SchemaCatalog& catalog);

// Exposed for tests: code fence contents if present, else the substring
// from the first SELECT onward; empty when neither exists.
std::string extract_sql_text(const std::string& response);

}  // namespace sqlink
