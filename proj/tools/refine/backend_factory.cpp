#include <iostream>

#include "commands.hpp"
#include "refine/cassette.hpp"
#include "refine/remote_backend.hpp"
#include "refine/scripted_backend.hpp"

namespace refine::cli {

BackendHandle make_backend(const std::string& spec) {
  BackendHandle h;
  const auto colon = spec.find(':');
  const std::string kind = spec.substr(0, colon);
  const std::string arg = colon == std::string::npos ? std::string{} : spec.substr(colon + 1);

  if (kind == "remote") {
    h.owned.push_back(std::make_unique<RemoteBackend>(RemoteConfig::from_env()));
  } else if (kind == "record") {
    if (arg.empty()) throw CLI::ValidationError("--backend", "record:<cassette> needs a file");
    h.owned.push_back(std::make_unique<RemoteBackend>(RemoteConfig::from_env()));
    h.owned.push_back(std::make_unique<RecordingBackend>(*h.owned.back(), arg));
  } else if (kind == "replay") {
    if (arg.empty()) throw CLI::ValidationError("--backend", "replay:<cassette> needs a file");
    h.owned.push_back(std::make_unique<ReplayBackend>(arg));
  } else if (kind == "script") {
    if (arg.empty()) throw CLI::ValidationError("--backend", "script:<file> needs a file");
    h.owned.push_back(std::make_unique<ScriptedBackend>(ScriptedBackend::from_file(arg)));
    h.exclusive = true;
  } else {
    throw CLI::ValidationError("--backend", "unknown backend '" + spec + "' (remote, record:, replay:, script:)");
  }
  h.top = h.owned.back().get();
  return h;
}

std::size_t effective_parallelism(const BackendHandle& b, std::size_t requested) {
  if (b.exclusive && requested > 1) {
    std::cerr << "note: scripted backend is order-dependent; running with --parallel 1\n";
    return 1;
  }
  return std::max<std::size_t>(requested, 1);
}

}  // namespace refine::cli
