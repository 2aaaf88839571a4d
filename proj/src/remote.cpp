#include "sqlink/remote.hpp"

#include "http_util.hpp"
#include "sqlink/error.hpp"
#include "sqlink/vecops.hpp"

namespace sqlink {

namespace {

using nlohmann::json;

json request_embeddings(const RemoteEndpointConfig& config,
                        const std::vector<std::string>& inputs, bool per_token) {
  json body = {{"input", inputs}, {"model", config.model}};
  if (per_token) body["per_token"] = true;
  json response = detail::post_json_with_retries(
      config.url, body, config.auth_env, config.timeout_seconds, config.retries,
      config.backoff_seconds);
  if (!response.contains("data") || !response.at("data").is_array() ||
      response.at("data").size() != inputs.size()) {
    throw ClientError("embedding endpoint returned mismatched data array");
  }
  return response.at("data");
}

std::vector<double> to_vector(const json& embedding) {
  std::vector<double> v;
  v.reserve(embedding.size());
  for (const auto& x : embedding) v.push_back(x.get<double>());
  return v;
}

}  // namespace

std::vector<std::vector<double>> RemoteEmbedder::embed_batch(
    const std::vector<std::string>& texts) {
  if (texts.empty()) return {};
  json data = request_embeddings(config_, texts, false);
  std::vector<std::vector<double>> out;
  for (const auto& item : data) {
    auto v = to_vector(item.at("embedding"));
    double norm = vecops::l2_norm(v);
    if (norm == 0.0 || v.empty()) {
      throw ClientError("embedding endpoint returned a zero vector");
    }
    vecops::scale(1.0 / norm, v);
    out.push_back(std::move(v));
  }
  return out;
}

std::vector<std::vector<double>> RemoteTokenEncoder::encode_tokens(
    const std::string& span_text) {
  json data;
  try {
    data = request_embeddings(config_, {span_text}, true);
  } catch (const ClientError& e) {
    throw EncoderError(e.what(), true);  // transport problems are retryable
  }
  const json& tokens = data.at(0).at("embedding");
  if (!tokens.is_array()) {
    throw EncoderError("per-token endpoint returned a flat embedding", true);
  }
  std::vector<std::vector<double>> out;
  for (const auto& tok : tokens) {
    auto v = to_vector(tok);
    if (v.size() != dim_) {
      throw EncoderError("token vector dimension " + std::to_string(v.size()) +
                             " != configured " + std::to_string(dim_),
                         false);
    }
    out.push_back(std::move(v));
  }
  return out;
}

}  // namespace sqlink
