#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "refine/backend.hpp"

namespace refine::cli {

// A backend chain built from a --backend spec:
//   remote            OpenAI-compatible endpoint from REFINE_* env vars
//   record:<file>     remote, appending every call to a cassette
//   replay:<file>     cassette only, no network
//   script:<file>     scripted replies (JSON)
struct BackendHandle {
  std::vector<std::unique_ptr<Backend>> owned;
  Backend* top = nullptr;
  bool exclusive = false;  // order-dependent, must run single-threaded

  Backend& get() const { return *top; }
};

BackendHandle make_backend(const std::string& spec);

// Effective worker count for a backend; scripted backends run serially.
std::size_t effective_parallelism(const BackendHandle& b, std::size_t requested);

void add_revise_command(CLI::App& app);
void add_collect_command(CLI::App& app);
void add_eval_command(CLI::App& app);
void add_attn_command(CLI::App& app);

}  // namespace refine::cli
