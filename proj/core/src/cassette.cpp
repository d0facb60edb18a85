#include "refine/cassette.hpp"

namespace refine {

json cassette_entry_to_json(const CassetteEntry& e) {
  return json{{"request_hash", e.request_hash},
              {"request", e.request},
              {"response",
               {{"text", e.response.text},
                {"backend_name", e.response.backend_name},
                {"latency_ms", e.response.latency_ms}}}};
}

CassetteEntry cassette_entry_from_json(const json& j) {
  CassetteEntry e;
  e.request_hash = j.at("request_hash").get<std::string>();
  e.request = j.value("request", json::object());
  const auto& r = j.at("response");
  e.response.text = r.at("text").get<std::string>();
  e.response.backend_name = r.value("backend_name", std::string{});
  e.response.latency_ms = r.value("latency_ms", 0.0);
  return e;
}

RecordingBackend::RecordingBackend(Backend& inner, const std::filesystem::path& cassette_path, bool truncate)
    : inner_(inner), out_(cassette_path, truncate ? std::ios::trunc : std::ios::app) {
  if (!out_) throw std::runtime_error("cannot open cassette for writing: " + cassette_path.string());
}

GenerationResult RecordingBackend::generate(const GenerationRequest& req) {
  auto result = inner_.generate(req);
  CassetteEntry entry{canonical_request_hash(req), canonical_request_json(req), result};
  const std::string line = cassette_entry_to_json(entry).dump(-1, ' ', false, json::error_handler_t::replace);
  std::lock_guard lock(mu_);
  out_ << line << '\n';
  out_.flush();
  return result;
}

ReplayBackend::ReplayBackend(const std::filesystem::path& cassette_path) {
  std::ifstream in(cassette_path);
  if (!in) throw std::runtime_error("cannot open cassette: " + cassette_path.string());
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto e = cassette_entry_from_json(json::parse(line));
    entries_.emplace(e.request_hash, std::move(e.response));
  }
}

GenerationResult ReplayBackend::generate(const GenerationRequest& req) {
  const auto hash = canonical_request_hash(req);
  auto it = entries_.find(hash);
  if (it == entries_.end()) {
    throw BackendError(BackendErrorKind::replay_miss, hash, "no recorded interaction for stage '" + req.stage + "'");
  }
  return it->second;
}

}  // namespace refine
