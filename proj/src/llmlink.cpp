#include "sqlink/llmlink.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <fstream>
#include <sstream>

#include "http_util.hpp"
#include "json.hpp"
#include "sqlink/error.hpp"
#include "sqlink/sqlast.hpp"

namespace sqlink {

namespace {

using nlohmann::json;

// Case-insensitive search for a whole word.
std::size_t find_word_ci(const std::string& text, const std::string& word,
                         std::size_t from = 0) {
  auto lower = [](char c) { return std::tolower(static_cast<unsigned char>(c)); };
  for (std::size_t i = from; i + word.size() <= text.size(); ++i) {
    bool match = true;
    for (std::size_t k = 0; k < word.size(); ++k) {
      if (lower(text[i + k]) != lower(word[k])) {
        match = false;
        break;
      }
    }
    if (!match) continue;
    bool left_ok = i == 0 || !std::isalnum(static_cast<unsigned char>(text[i - 1]));
    std::size_t after = i + word.size();
    bool right_ok =
        after >= text.size() || !std::isalnum(static_cast<unsigned char>(text[after]));
    if (left_ok && right_ok) return i;
  }
  return std::string::npos;
}

// Contents of the first ``` fence, the language tag stripped.
std::optional<std::string> first_fence(const std::string& text) {
  auto open = text.find("```");
  if (open == std::string::npos) return std::nullopt;
  auto body_start = open + 3;
  auto nl = text.find('\n', body_start);
  auto close = text.find("```", body_start);
  if (close == std::string::npos) return std::nullopt;
  if (nl != std::string::npos && nl < close) {
    // first line is a language tag (```json, ```sql, ...) or empty
    body_start = nl + 1;
  }
  if (body_start >= close) return std::string();
  return text.substr(body_start, close - body_start);
}

std::string trim(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

// Balanced-brace extraction aware of string literals.
std::optional<std::string> balanced_object(const std::string& text,
                                           std::size_t start) {
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = start; i < text.size(); ++i) {
    char c = text[i];
    if (in_string) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}') {
      --depth;
      if (depth == 0) return text.substr(start, i - start + 1);
    }
  }
  return std::nullopt;
}

std::optional<json> first_json_object(const std::string& text) {
  auto try_parse = [](const std::string& candidate) -> std::optional<json> {
    try {
      json parsed = json::parse(candidate);
      if (parsed.is_object()) return parsed;
    } catch (const json::parse_error&) {
    }
    return std::nullopt;
  };

  if (auto fence = first_fence(text)) {
    if (auto parsed = try_parse(trim(*fence))) return parsed;
  }
  for (std::size_t pos = text.find('{'); pos != std::string::npos;
       pos = text.find('{', pos + 1)) {
    if (auto candidate = balanced_object(text, pos)) {
      if (auto parsed = try_parse(*candidate)) return parsed;
    }
  }
  return std::nullopt;
}

}  // namespace

// ---- clients --------------------------------------------------------------

HttpLlmClient::HttpLlmClient(LlmClientConfig config)
    : config_(std::move(config)),
      in_flight_(std::max(config_.max_concurrency, 1)) {
  if (config_.endpoint_url.empty()) {
    throw ConfigError("HttpLlmClient: endpoint_url is required");
  }
  if (config_.temperature < 0.0) {
    throw ConfigError("HttpLlmClient: temperature must be >= 0");
  }
  if (config_.retries < 0) {
    throw ConfigError("HttpLlmClient: retries must be >= 0");
  }
}

namespace {

struct SemaphoreGuard {
  std::counting_semaphore<>& sem;
  explicit SemaphoreGuard(std::counting_semaphore<>& s) : sem(s) { sem.acquire(); }
  ~SemaphoreGuard() { sem.release(); }
};

}  // namespace

std::string HttpLlmClient::complete(const std::string& prompt) {
  json body = {
      {"model", config_.model},
      {"messages", json::array({json{{"role", "user"}, {"content", prompt}}})},
      {"temperature", config_.temperature},
      {"max_tokens", config_.max_tokens},
  };
  SemaphoreGuard guard(in_flight_);
  json response = detail::post_json_with_retries(
      config_.endpoint_url, body, config_.auth_env, config_.timeout_seconds,
      config_.retries, config_.backoff_seconds);
  try {
    return response.at("choices").at(0).at("message").at("content")
        .get<std::string>();
  } catch (const json::exception& e) {
    throw ClientError("chat response missing choices[0].message.content: " +
                      std::string(e.what()));
  }
}

MockLlmClient::MockLlmClient(std::vector<std::string> responses)
    : responses_(std::move(responses)) {}

MockLlmClient MockLlmClient::from_script_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open mock script: " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw IoError("mock script malformed: " + std::string(e.what()));
  }
  std::vector<std::string> responses;
  if (doc.is_array()) {
    for (const auto& r : doc) responses.push_back(r.get<std::string>());
  } else if (doc.is_object()) {
    for (std::size_t i = 0; i < doc.size(); ++i) {
      auto key = std::to_string(i);
      if (!doc.contains(key)) {
        throw IoError("mock script missing ordinal '" + key + "'");
      }
      responses.push_back(doc.at(key).get<std::string>());
    }
  } else {
    throw IoError("mock script must be a JSON array or object");
  }
  return MockLlmClient(std::move(responses));
}

std::string MockLlmClient::complete(const std::string&) {
  int idx = next_.fetch_add(1);
  if (idx >= static_cast<int>(responses_.size())) {
    throw ClientError("mock script exhausted at request " + std::to_string(idx));
  }
  return responses_[idx];
}

// ---- prompts ----------------------------------------------------------------

LinkInstruction build_link_instruction(const SchemaCatalog& catalog,
                                       const std::string& evidence,
                                       const std::string& question) {
  std::ostringstream out;
  out << "You are a database expert doing schema linking: pick the tables and "
         "columns needed to answer the question.\n\n";
  out << "Database schema:\n" << serialize_schema(catalog, SchemaStyle::ddl) << "\n\n";
  if (!evidence.empty()) out << "Evidence: " << evidence << "\n";
  out << "Question: " << question << "\n\n";
  out << "Answer with a single JSON object mapping each relevant table name to "
         "an array of its relevant column names, for example {\"table\": "
         "[\"col\", \"col2\"]}. Use only names from the schema. No other text.";
  return LinkInstruction{out.str()};
}

LinkParse parse_link_response(const std::string& text,
                              const SchemaCatalog& catalog) {
  auto object = first_json_object(text);
  if (!object) {
    throw UnparseableResponseError("no JSON object found in response");
  }
  LinkParse out;
  for (const auto& [raw_table, value] : object->items()) {
    const TableSchema* table = catalog.find_table(normalize_identifier(raw_table));
    if (table == nullptr) {
      ++out.dropped_names;
      continue;
    }
    out.set.insert(SchemaElementId::table_id(table->name));
    std::vector<std::string> column_names;
    if (value.is_array()) {
      for (const auto& entry : value) {
        if (entry.is_string()) {
          column_names.push_back(entry.get<std::string>());
        } else {
          ++out.dropped_names;
        }
      }
    } else if (value.is_string()) {
      column_names.push_back(value.get<std::string>());
    } else if (!value.is_null()) {
      ++out.dropped_names;
    }
    for (const auto& raw_col : column_names) {
      const ColumnSchema* col = table->find_column(normalize_identifier(raw_col));
      if (col == nullptr) {
        ++out.dropped_names;
        continue;
      }
      out.set.insert(SchemaElementId::column_id(table->name, col->name));
    }
  }
  return out;
}

LinkOutcome link_database_level(LlmClient& client, const Instance& instance,
                                const SchemaCatalog& catalog, int retries) {
  LinkInstruction inst = build_link_instruction(catalog, instance.evidence,
                                                instance.question);
  LinkOutcome out;
  std::string last_error;
  for (int attempt = 0; attempt <= retries; ++attempt) {
    out.attempts = attempt + 1;
    std::string response = client.complete(inst.prompt);
    try {
      LinkParse parsed = parse_link_response(response, catalog);
      out.set = std::move(parsed.set);
      out.dropped_names = parsed.dropped_names;
      return out;
    } catch (const UnparseableResponseError& e) {
      last_error = e.what();
    }
  }
  out.set = SchemaSet{};
  out.error = "unparseable after " + std::to_string(retries + 1) +
              " attempts: " + last_error;
  return out;
}

std::string build_generation_prompt(const SchemaSet& d_f,
                                    const SchemaCatalog& catalog,
                                    const std::string& evidence,
                                    const std::string& question) {
  if (d_f.empty()) {
    throw PreconditionError("build_generation_prompt: empty schema set");
  }
  SchemaCatalog sub = subset_catalog(catalog, d_f);
  std::ostringstream out;
  out << "You are a database expert. Write one SQLite SELECT query that answers "
         "the question.\n\n";
  out << "Database schema:\n" << serialize_schema(sub, SchemaStyle::ddl) << "\n\n";
  if (!evidence.empty()) out << "Evidence: " << evidence << "\n";
  out << "Question: " << question << "\n\n";
  out << "Answer with only the SQL query inside a ```sql code fence.";
  return out.str();
}

std::string extract_sql_text(const std::string& response) {
  std::string candidate;
  if (auto fence = first_fence(response)) {
    candidate = trim(*fence);
    // fences occasionally wrap prose; fall through to SELECT search if the
    // fence holds none
    if (find_word_ci(candidate, "select") == std::string::npos) candidate.clear();
  }
  if (candidate.empty()) {
    auto pos = find_word_ci(response, "select");
    if (pos == std::string::npos) return "";
    candidate = trim(response.substr(pos));
  }
  while (!candidate.empty() &&
         (candidate.back() == ';' ||
          std::isspace(static_cast<unsigned char>(candidate.back())))) {
    candidate.pop_back();
  }
  return candidate;
}

GenerationResult generate_sql(LlmClient& client, const Instance& instance,
                              const SchemaSet& d_f, const SchemaCatalog& catalog) {
  std::string prompt =
      build_generation_prompt(d_f, catalog, instance.evidence, instance.question);
  GenerationResult out;
  auto start = std::chrono::steady_clock::now();
  out.raw_response = client.complete(prompt);
  out.duration_ms = std::chrono::duration<double, std::milli>(
                        std::chrono::steady_clock::now() - start)
                        .count();
  out.sql_text = extract_sql_text(out.raw_response);
  if (out.sql_text.empty()) {
    out.unparseable = true;
    return out;
  }
  try {
    sql::parse_sql(out.sql_text);
  } catch (const Error&) {
    out.unparseable = true;
  }
  return out;
}

}  // namespace sqlink
