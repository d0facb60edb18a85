#include <exception>
#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"refine: critique-revise-decide loop, data collection, benchmark scoring and attention analysis"};
  app.require_subcommand(1);
  refine::cli::add_revise_command(app);
  refine::cli::add_collect_command(app);
  refine::cli::add_eval_command(app);
  refine::cli::add_attn_command(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
