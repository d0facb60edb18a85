#include <iostream>

#include "commands.hpp"
#include "refine/collect.hpp"

namespace refine::cli {

void add_collect_command(CLI::App& app) {
  struct Args {
    std::string in;
    std::string backend;
    std::string out_dir;
    std::string templates;
    std::uint32_t max_tokens = 512;
    std::int64_t timeout_ms = 60000;
    std::size_t parallel = 1;
  };
  auto a = std::make_shared<Args>();
  auto* cmd = app.add_subcommand("collect", "Collect teacher feedback and build revision records");
  cmd->add_option("--in", a->in, "source JSONL")->required()->check(CLI::ExistingFile);
  cmd->add_option("--backend", a->backend, "teacher backend spec")->required();
  cmd->add_option("--out-dir", a->out_dir, "output directory")->required();
  cmd->add_option("--templates", a->templates, "template directory")->check(CLI::ExistingDirectory);
  cmd->add_option("--max-tokens", a->max_tokens)->capture_default_str();
  cmd->add_option("--timeout-ms", a->timeout_ms)->capture_default_str();
  cmd->add_option("--parallel", a->parallel)->capture_default_str();
  cmd->callback([a] {
    auto backend = make_backend(a->backend);
    auto templates = a->templates.empty() ? TemplateSet::defaults() : TemplateSet::load_dir(a->templates);
    CollectOptions opts;
    opts.parallelism = effective_parallelism(backend, a->parallel);
    opts.decode.max_tokens = a->max_tokens;
    opts.timeout = std::chrono::milliseconds(a->timeout_ms);
    const auto items = read_collection_jsonl(a->in);
    const auto s = collect_to_directory(backend.get(), items, a->out_dir, templates, opts);
    std::cerr << "collected " << s.collected << ", skipped " << s.skipped << " (already done), rejected " << s.rejected
              << " -> " << a->out_dir << "\n";
  });
}

}  // namespace refine::cli
