#include <fstream>
#include <iostream>

#include "commands.hpp"
#include "refine/engine.hpp"

namespace refine::cli {

namespace {

struct ReviseArgs {
  std::string input;
  std::string backend;
  std::string out;
  std::string templates;
  std::string mode = "full";
  std::uint32_t max_iters = 3;
  std::uint64_t seed = 0;
  std::uint32_t max_tokens = 512;
  std::int64_t timeout_ms = 60000;
  std::size_t parallel = 1;
};

void run_revise(const ReviseArgs& a) {
  EngineConfig cfg;
  cfg.max_iterations = a.max_iters;
  cfg.mode = parse_engine_mode(a.mode);
  cfg.rng_seed = a.seed;
  cfg.decode.max_tokens = a.max_tokens;

  auto backend = make_backend(a.backend);
  auto templates = a.templates.empty() ? TemplateSet::defaults() : TemplateSet::load_dir(a.templates);
  RevisionEngine engine(backend.get(), cfg, std::move(templates));
  engine.set_timeout(std::chrono::milliseconds(a.timeout_ms));

  const auto queries = read_queries_jsonl(a.input);
  const auto transcripts = run_batch(engine, queries, effective_parallelism(backend, a.parallel));

  std::ofstream out(a.out, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + a.out);
  std::size_t accepted = 0;
  for (const auto& t : transcripts) {
    out << serialize_transcript(t) << '\n';
    accepted += t.final.stage == ResponseStage::revised ? 1 : 0;
  }
  std::cerr << "revised " << transcripts.size() << " queries (" << accepted << " final answers changed) -> " << a.out
            << "\n";
}

}  // namespace

void add_revise_command(CLI::App& app) {
  auto args = std::make_shared<ReviseArgs>();
  auto* cmd = app.add_subcommand("revise", "Run the critique-revise-decide loop over a JSONL file of queries");
  cmd->add_option("--input", args->input, "queries JSONL: {id, image, question}")->required()->check(CLI::ExistingFile);
  cmd->add_option("--backend", args->backend, "remote | record:<cassette> | replay:<cassette> | script:<file>")
      ->required();
  cmd->add_option("--out", args->out, "output transcripts JSONL")->required();
  cmd->add_option("--max-iters", args->max_iters, "maximum critique-revise-decide iterations")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  cmd->add_option("--mode", args->mode, "full | prediction-only | no-decision")
      ->capture_default_str()
      ->check(CLI::IsMember({"full", "prediction-only", "no-decision", "prediction_only", "no_decision"}));
  cmd->add_option("--seed", args->seed, "seed for decision-order randomization")->capture_default_str();
  cmd->add_option("--templates", args->templates, "directory of <stage>.txt prompt templates")
      ->check(CLI::ExistingDirectory);
  cmd->add_option("--max-tokens", args->max_tokens, "max output tokens per stage")->capture_default_str();
  cmd->add_option("--timeout-ms", args->timeout_ms, "per-call timeout")->capture_default_str();
  cmd->add_option("--parallel", args->parallel, "queries in flight")->capture_default_str();
  cmd->callback([args] { run_revise(*args); });
}

}  // namespace refine::cli
