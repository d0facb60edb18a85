#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "refine/types.hpp"

namespace refine {

enum class Role { system, user, assistant };

std::string_view to_string(Role r);
Role parse_role(std::string_view s);

struct Segment {
  enum class Kind { text, image };

  Kind kind = Kind::text;
  std::string value;  // text, or the image locator

  static Segment text(std::string t) { return {Kind::text, std::move(t)}; }
  static Segment image(std::string ref) { return {Kind::image, std::move(ref)}; }

  bool operator==(const Segment&) const = default;
};

struct MessagePart {
  Role role = Role::user;
  std::vector<Segment> content;

  bool operator==(const MessagePart&) const = default;
};

struct GenerationRequest {
  std::vector<MessagePart> messages;
  DecodeOptions decode;
  std::chrono::milliseconds timeout{60000};
  // Free-form label of the pipeline stage that issued the request
  // ("initial", "critique", ...). Used for routing scripted replies and
  // error messages; not part of the canonical hash.
  std::string stage;

  void validate() const;
  // Concatenation of all text segments, in order.
  std::string joined_text() const;
  std::size_t image_count() const;
};

struct GenerationResult {
  std::string text;
  std::string backend_name;
  double latency_ms = 0.0;
};

// Canonical JSON of the hashed part of a request: messages and decode
// directive. Timeout and stage label are excluded.
json canonical_request_json(const GenerationRequest& req);
GenerationRequest request_from_canonical_json(const json& j);
// SHA-256 of the canonical JSON dump, lowercase hex (64 chars).
std::string canonical_request_hash(const GenerationRequest& req);

enum class BackendErrorKind { timeout, transport, replay_miss, script_exhausted };

std::string_view to_string(BackendErrorKind k);
BackendErrorKind parse_backend_error_kind(std::string_view s);

class BackendError : public std::runtime_error {
 public:
  BackendError(BackendErrorKind kind, std::string request_hash, std::string detail);

  BackendErrorKind kind() const noexcept { return kind_; }
  const std::string& request_hash() const noexcept { return request_hash_; }
  const std::string& detail() const noexcept { return detail_; }
  const std::string& stage() const noexcept { return stage_; }
  std::optional<std::uint32_t> iteration() const noexcept { return iteration_; }

  // Copy of this error carrying the pipeline stage and iteration.
  BackendError annotated(std::string stage, std::optional<std::uint32_t> iteration) const;

 private:
  BackendError(BackendErrorKind kind, std::string request_hash, std::string detail, std::string stage,
               std::optional<std::uint32_t> iteration);

  static std::string compose(BackendErrorKind kind, const std::string& hash, const std::string& detail,
                             const std::string& stage, std::optional<std::uint32_t> iteration);

  BackendErrorKind kind_;
  std::string request_hash_;
  std::string detail_;
  std::string stage_;
  std::optional<std::uint32_t> iteration_;
};

// Text-in/text-out model contract. Implementations must tolerate
// concurrent generate() calls unless documented otherwise.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual GenerationResult generate(const GenerationRequest& req) = 0;
  virtual std::string name() const = 0;
};

// Decorator that counts calls per stage label. Thread-safe.
class CountingBackend : public Backend {
 public:
  explicit CountingBackend(Backend& inner) : inner_(inner) {}

  GenerationResult generate(const GenerationRequest& req) override;
  std::string name() const override { return inner_.name(); }

  std::size_t calls() const noexcept { return calls_.load(); }
  std::size_t calls(const std::string& stage) const;
  std::vector<std::string> stage_sequence() const;
  void reset();

 private:
  Backend& inner_;
  std::atomic<std::size_t> calls_{0};
  mutable std::mutex mu_;
  std::map<std::string, std::size_t> per_stage_;
  std::vector<std::string> sequence_;
};

}  // namespace refine
