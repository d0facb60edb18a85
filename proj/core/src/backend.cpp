#include "refine/backend.hpp"

#include <openssl/evp.h>

#include <array>
#include <cstdio>

namespace refine {

std::string_view to_string(Role r) {
  switch (r) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
  }
  return "user";
}

Role parse_role(std::string_view s) {
  if (s == "system") return Role::system;
  if (s == "user") return Role::user;
  if (s == "assistant") return Role::assistant;
  throw ValidationError("unknown role: '" + std::string(s) + "'");
}

void GenerationRequest::validate() const {
  if (messages.empty()) throw ValidationError("GenerationRequest: messages must be non-empty");
  if (decode.max_tokens < 1) throw ValidationError("GenerationRequest: max_tokens must be >= 1");
  if (image_count() > 1) throw ValidationError("GenerationRequest: at most one image per request");
}

std::string GenerationRequest::joined_text() const {
  std::string out;
  for (const auto& m : messages) {
    for (const auto& s : m.content) {
      if (s.kind == Segment::Kind::text) out += s.value;
    }
  }
  return out;
}

std::size_t GenerationRequest::image_count() const {
  std::size_t n = 0;
  for (const auto& m : messages) {
    for (const auto& s : m.content) n += s.kind == Segment::Kind::image ? 1 : 0;
  }
  return n;
}

json canonical_request_json(const GenerationRequest& req) {
  json messages = json::array();
  for (const auto& m : req.messages) {
    json content = json::array();
    for (const auto& s : m.content) {
      if (s.kind == Segment::Kind::text) {
        content.push_back({{"type", "text"}, {"text", s.value}});
      } else {
        content.push_back({{"type", "image"}, {"image_ref", s.value}});
      }
    }
    messages.push_back({{"role", to_string(m.role)}, {"content", std::move(content)}});
  }
  return json{{"messages", std::move(messages)}, {"decode", req.decode}};
}

GenerationRequest request_from_canonical_json(const json& j) {
  GenerationRequest req;
  for (const auto& m : j.at("messages")) {
    MessagePart part;
    part.role = parse_role(m.at("role").get<std::string>());
    for (const auto& s : m.at("content")) {
      if (s.at("type") == "text") {
        part.content.push_back(Segment::text(s.at("text").get<std::string>()));
      } else {
        part.content.push_back(Segment::image(s.at("image_ref").get<std::string>()));
      }
    }
    req.messages.push_back(std::move(part));
  }
  req.decode = j.at("decode").get<DecodeOptions>();
  return req;
}

std::string canonical_request_hash(const GenerationRequest& req) {
  const std::string body = canonical_request_json(req).dump(-1, ' ', false, json::error_handler_t::replace);
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  EVP_Digest(body.data(), body.size(), digest.data(), &len, EVP_sha256(), nullptr);
  std::string hex;
  hex.reserve(len * 2);
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

std::string_view to_string(BackendErrorKind k) {
  switch (k) {
    case BackendErrorKind::timeout: return "Timeout";
    case BackendErrorKind::transport: return "Transport";
    case BackendErrorKind::replay_miss: return "ReplayMiss";
    case BackendErrorKind::script_exhausted: return "ScriptExhausted";
  }
  return "Unknown";
}

BackendErrorKind parse_backend_error_kind(std::string_view s) {
  for (auto k : {BackendErrorKind::timeout, BackendErrorKind::transport, BackendErrorKind::replay_miss,
                 BackendErrorKind::script_exhausted}) {
    if (to_string(k) == s) return k;
  }
  if (s == "timeout") return BackendErrorKind::timeout;
  if (s == "transport") return BackendErrorKind::transport;
  throw ValidationError("unknown backend error kind: '" + std::string(s) + "'");
}

BackendError::BackendError(BackendErrorKind kind, std::string request_hash, std::string detail)
    : BackendError(kind, std::move(request_hash), std::move(detail), {}, std::nullopt) {}

BackendError::BackendError(BackendErrorKind kind, std::string request_hash, std::string detail,
                           std::string stage, std::optional<std::uint32_t> iteration)
    : std::runtime_error(compose(kind, request_hash, detail, stage, iteration)),
      kind_(kind),
      request_hash_(std::move(request_hash)),
      detail_(std::move(detail)),
      stage_(std::move(stage)),
      iteration_(iteration) {}

BackendError BackendError::annotated(std::string stage, std::optional<std::uint32_t> iteration) const {
  return BackendError(kind_, request_hash_, detail_, std::move(stage), iteration);
}

std::string BackendError::compose(BackendErrorKind kind, const std::string& hash, const std::string& detail,
                                  const std::string& stage, std::optional<std::uint32_t> iteration) {
  std::string msg(to_string(kind));
  if (!stage.empty()) {
    msg += " in stage '" + stage + "'";
    if (iteration) msg += " (iteration " + std::to_string(*iteration) + ")";
  }
  msg += " [request " + hash.substr(0, 16) + "]";
  if (!detail.empty()) msg += ": " + detail;
  return msg;
}

GenerationResult CountingBackend::generate(const GenerationRequest& req) {
  calls_.fetch_add(1);
  {
    std::lock_guard lock(mu_);
    ++per_stage_[req.stage];
    sequence_.push_back(req.stage);
  }
  return inner_.generate(req);
}

std::size_t CountingBackend::calls(const std::string& stage) const {
  std::lock_guard lock(mu_);
  auto it = per_stage_.find(stage);
  return it == per_stage_.end() ? 0 : it->second;
}

std::vector<std::string> CountingBackend::stage_sequence() const {
  std::lock_guard lock(mu_);
  return sequence_;
}

void CountingBackend::reset() {
  std::lock_guard lock(mu_);
  calls_ = 0;
  per_stage_.clear();
  sequence_.clear();
}

}  // namespace refine
