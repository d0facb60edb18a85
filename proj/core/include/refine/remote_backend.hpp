#pragma once

#include <string>

#include "refine/backend.hpp"

namespace refine {

struct RemoteConfig {
  // Full URL of the chat-completions endpoint, or a base URL to which
  // "/v1/chat/completions" is appended.
  std::string endpoint;
  std::string api_key;
  std::string model = "default";
  int transport_retries = 1;

  // REFINE_ENDPOINT, REFINE_API_KEY, REFINE_MODEL.
  static RemoteConfig from_env();
};

// OpenAI-compatible chat-completions client. Each call opens its own
// connection, so concurrent generate() calls are safe.
class RemoteBackend : public Backend {
 public:
  explicit RemoteBackend(RemoteConfig cfg);

  GenerationResult generate(const GenerationRequest& req) override;
  std::string name() const override { return "remote:" + cfg_.model; }

  // Request body as sent on the wire. Images are inlined as data URLs.
  json build_body(const GenerationRequest& req) const;

 private:
  RemoteConfig cfg_;
  std::string scheme_host_port_;
  std::string path_;
};

// Image locator -> URL usable in an image_url content part. http(s) and
// data: URLs pass through; anything else is read as a file and inlined.
std::string image_to_url(const std::string& image_ref);

std::string base64_encode(std::string_view bytes);

// Replaces every occurrence of secret with "[REDACTED]".
std::string redact(std::string text, const std::string& secret);

// Extracts choices[0].message.content; throws std::runtime_error when the
// body does not have that shape.
std::string parse_chat_completion(const json& body);

}  // namespace refine
