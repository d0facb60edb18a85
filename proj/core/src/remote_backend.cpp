#include "refine/remote_backend.hpp"

#include <httplib.h>
#include <openssl/evp.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>

namespace refine {

namespace {

std::string env_or(const char* name, std::string fallback) {
  const char* v = std::getenv(name);
  return v && *v ? std::string(v) : std::move(fallback);
}

std::string mime_for(const std::filesystem::path& p) {
  auto ext = p.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (ext == ".png") return "image/png";
  if (ext == ".gif") return "image/gif";
  if (ext == ".webp") return "image/webp";
  if (ext == ".bmp") return "image/bmp";
  return "image/jpeg";
}

bool starts_with(const std::string& s, std::string_view prefix) {
  return s.compare(0, prefix.size(), prefix) == 0;
}

}  // namespace

RemoteConfig RemoteConfig::from_env() {
  RemoteConfig cfg;
  cfg.endpoint = env_or("REFINE_ENDPOINT", "http://127.0.0.1:8000");
  cfg.api_key = env_or("REFINE_API_KEY", "");
  cfg.model = env_or("REFINE_MODEL", "default");
  return cfg;
}

RemoteBackend::RemoteBackend(RemoteConfig cfg) : cfg_(std::move(cfg)) {
  const auto scheme_end = cfg_.endpoint.find("://");
  if (scheme_end == std::string::npos) {
    throw ValidationError("remote endpoint must include a scheme: '" + cfg_.endpoint + "'");
  }
  const auto path_start = cfg_.endpoint.find('/', scheme_end + 3);
  scheme_host_port_ = cfg_.endpoint.substr(0, path_start);
  path_ = path_start == std::string::npos ? std::string{} : cfg_.endpoint.substr(path_start);
  if (path_.empty() || path_ == "/") path_ = "/v1/chat/completions";
}

std::string base64_encode(std::string_view bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(bytes.data()),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::string image_to_url(const std::string& image_ref) {
  if (starts_with(image_ref, "http://") || starts_with(image_ref, "https://") || starts_with(image_ref, "data:")) {
    return image_ref;
  }
  std::ifstream in(image_ref, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read image: " + image_ref);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return "data:" + mime_for(image_ref) + ";base64," + base64_encode(bytes);
}

std::string redact(std::string text, const std::string& secret) {
  if (secret.empty()) return text;
  static constexpr std::string_view kMask = "[REDACTED]";
  for (auto pos = text.find(secret); pos != std::string::npos; pos = text.find(secret, pos + kMask.size())) {
    text.replace(pos, secret.size(), kMask);
  }
  return text;
}

json RemoteBackend::build_body(const GenerationRequest& req) const {
  json messages = json::array();
  for (const auto& m : req.messages) {
    json content = json::array();
    for (const auto& s : m.content) {
      if (s.kind == Segment::Kind::text) {
        content.push_back({{"type", "text"}, {"text", s.value}});
      } else {
        content.push_back({{"type", "image_url"}, {"image_url", {{"url", image_to_url(s.value)}}}});
      }
    }
    messages.push_back({{"role", to_string(m.role)}, {"content", std::move(content)}});
  }
  json body{{"model", cfg_.model}, {"messages", std::move(messages)}, {"max_tokens", req.decode.max_tokens}};
  if (req.decode.greedy) body["temperature"] = 0;
  return body;
}

std::string parse_chat_completion(const json& body) {
  const auto& content = body.at("choices").at(0).at("message").at("content");
  if (content.is_string()) return content.get<std::string>();
  if (content.is_array()) {
    std::string text;
    for (const auto& part : content) {
      if (part.value("type", std::string{}) == "text") text += part.value("text", std::string{});
    }
    return text;
  }
  throw std::runtime_error("message.content is neither a string nor a list of parts");
}

GenerationResult RemoteBackend::generate(const GenerationRequest& req) {
  req.validate();
  const auto hash = canonical_request_hash(req);
  const std::string payload = build_body(req).dump(-1, ' ', false, json::error_handler_t::replace);

  httplib::Headers headers;
  if (!cfg_.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg_.api_key);

  const auto timeout = req.timeout;
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);

  for (int attempt = 0;; ++attempt) {
    httplib::Client client(scheme_host_port_);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());

    const auto start = std::chrono::steady_clock::now();
    auto res = client.Post(path_, headers, payload, "application/json");
    const double elapsed_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();

    std::string failure;
    if (!res) {
      const auto err = res.error();
      if (err == httplib::Error::ConnectionTimeout ||
          (err == httplib::Error::Read && elapsed_ms >= static_cast<double>(timeout.count()))) {
        throw BackendError(BackendErrorKind::timeout, hash,
                           "no reply within " + std::to_string(timeout.count()) + " ms");
      }
      failure = httplib::to_string(err);
    } else if (res->status < 200 || res->status >= 300) {
      failure = "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 256);
    } else {
      try {
        return {parse_chat_completion(json::parse(res->body)), name(), elapsed_ms};
      } catch (const std::exception& e) {
        failure = std::string("malformed completion: ") + e.what();
      }
    }
    if (attempt >= cfg_.transport_retries) {
      throw BackendError(BackendErrorKind::transport, hash, redact(std::move(failure), cfg_.api_key));
    }
  }
}

}  // namespace refine
