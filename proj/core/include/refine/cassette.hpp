#pragma once

#include <filesystem>
#include <fstream>
#include <mutex>
#include <string>
#include <unordered_map>

#include "refine/backend.hpp"

namespace refine {

// One recorded interaction; a cassette is a JSONL file of these.
struct CassetteEntry {
  std::string request_hash;
  json request;  // canonical_request_json of the request
  GenerationResult response;
};

json cassette_entry_to_json(const CassetteEntry& e);
CassetteEntry cassette_entry_from_json(const json& j);

// Forwards to an inner backend and appends every successful interaction
// to a cassette file. Thread-safe if the inner backend is.
class RecordingBackend : public Backend {
 public:
  RecordingBackend(Backend& inner, const std::filesystem::path& cassette_path, bool truncate = false);

  GenerationResult generate(const GenerationRequest& req) override;
  std::string name() const override { return inner_.name(); }

 private:
  Backend& inner_;
  std::mutex mu_;
  std::ofstream out_;
};

// Serves replies from a cassette by canonical request hash; never touches
// the network. Read-only after construction, so safe for concurrent use.
class ReplayBackend : public Backend {
 public:
  explicit ReplayBackend(const std::filesystem::path& cassette_path);

  GenerationResult generate(const GenerationRequest& req) override;
  std::string name() const override { return "replay"; }

  std::size_t size() const noexcept { return entries_.size(); }

 private:
  // First recorded entry for a hash wins.
  std::unordered_map<std::string, GenerationResult> entries_;
};

}  // namespace refine
