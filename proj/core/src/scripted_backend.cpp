#include "refine/scripted_backend.hpp"

#include <fstream>

namespace refine {

namespace {

ScriptedReply reply_from_json(const json& j) {
  if (j.is_string()) return ScriptedReply::ok(j.get<std::string>());
  if (j.is_object() && j.contains("error")) {
    return ScriptedReply::fail(parse_backend_error_kind(j.at("error").get<std::string>()));
  }
  if (j.is_object() && j.contains("text")) return ScriptedReply::ok(j.at("text").get<std::string>());
  throw ValidationError("script entry must be a string, {\"text\":...} or {\"error\":...}");
}

std::vector<ScriptedReply> replies_from_json(const json& arr) {
  std::vector<ScriptedReply> out;
  for (const auto& e : arr) out.push_back(reply_from_json(e));
  return out;
}

}  // namespace

ScriptedBackend::ScriptedBackend(std::vector<ScriptedReply> replies,
                                 std::map<std::string, std::vector<ScriptedReply>> per_stage)
    : shared_(replies.begin(), replies.end()) {
  for (auto& [stage, list] : per_stage) per_stage_[stage] = std::deque<ScriptedReply>(list.begin(), list.end());
}

ScriptedBackend::ScriptedBackend(const std::vector<std::string>& replies) {
  for (const auto& r : replies) shared_.push_back(ScriptedReply::ok(r));
}

ScriptedBackend ScriptedBackend::from_json(const json& j) {
  if (j.is_array()) return ScriptedBackend(replies_from_json(j));
  std::vector<ScriptedReply> shared;
  if (j.contains("replies")) shared = replies_from_json(j.at("replies"));
  std::map<std::string, std::vector<ScriptedReply>> stages;
  if (j.contains("stages")) {
    for (const auto& [stage, arr] : j.at("stages").items()) stages[stage] = replies_from_json(arr);
  }
  return ScriptedBackend(std::move(shared), std::move(stages));
}

ScriptedBackend ScriptedBackend::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open script file: " + path);
  return from_json(json::parse(in));
}

GenerationResult ScriptedBackend::generate(const GenerationRequest& req) {
  ScriptedReply reply;
  {
    std::lock_guard lock(mu_);
    auto it = per_stage_.find(req.stage);
    if (it != per_stage_.end() && !it->second.empty()) {
      reply = std::move(it->second.front());
      it->second.pop_front();
    } else if (!shared_.empty()) {
      reply = std::move(shared_.front());
      shared_.pop_front();
    } else {
      throw BackendError(BackendErrorKind::script_exhausted, canonical_request_hash(req),
                         "no scripted reply left for stage '" + req.stage + "'");
    }
  }
  if (reply.error) {
    throw BackendError(*reply.error, canonical_request_hash(req), "scripted failure");
  }
  return {std::move(reply.text), name(), 0.0};
}

std::size_t ScriptedBackend::remaining() const {
  std::lock_guard lock(mu_);
  std::size_t n = shared_.size();
  for (const auto& [_, q] : per_stage_) n += q.size();
  return n;
}

GenerationResult CallbackBackend::generate(const GenerationRequest& req) {
  return {fn_(req), name_, 0.0};
}

}  // namespace refine
