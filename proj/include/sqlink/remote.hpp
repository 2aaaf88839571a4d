#pragma once

#include <string>

#include "sqlink/crossenc.hpp"
#include "sqlink/embedder.hpp"

// Remote embedding backends. Request shape: {"input": [strings], "model":
// string} (token encoders add "per_token": true); response shape:
// {"data": [{"embedding": ...}, ...]} in request order.
namespace sqlink {

struct RemoteEndpointConfig {
  std::string url;
  std::string model = "default";
  std::string auth_env = "EMBED_API_KEY";
  int timeout_seconds = 30;
  int retries = 2;
  double backoff_seconds = 0.25;
};

class RemoteEmbedder final : public EmbeddingBackend {
 public:
  explicit RemoteEmbedder(RemoteEndpointConfig config)
      : config_(std::move(config)) {}
  // Vectors are L2-normalized on receipt; a zero vector from the server is
  // a ClientError.
  std::vector<std::vector<double>> embed_batch(
      const std::vector<std::string>& texts) override;

 private:
  RemoteEndpointConfig config_;
};

class RemoteTokenEncoder final : public TokenEncoder {
 public:
  RemoteTokenEncoder(RemoteEndpointConfig config, std::size_t dim)
      : config_(std::move(config)), dim_(dim) {}
  std::size_t dim() const override { return dim_; }
  std::vector<std::vector<double>> encode_tokens(
      const std::string& span_text) override;

 private:
  RemoteEndpointConfig config_;
  std::size_t dim_;
};

}  // namespace sqlink
