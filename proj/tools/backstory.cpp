// backstory: generate event chains, score them, and analyse annotations.
//
// Exit status: 0 on success, 1 on a runtime failure (one diagnostic line on
// stderr), 2 on a usage error.

#include <iostream>

#include "cli/commands.hpp"

int main(int argc, char** argv) {
  using namespace backstory::cli;

  CLI::App app{"Emotion-steering backstory generation and evaluation", "backstory"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  app.add_option("--seed", g.seed, "Base seed for every random choice (default 0)");
  app.add_option("--config", g.config, "JSON config file; flags take precedence")
      ->check(CLI::ExistingFile);
  app.add_option("--backend", g.backend,
                 "Chat backend: http (BACKEND_URL, BACKEND_KEY), scripted or fixture:<path>");
  app.add_option("--record", g.record, "Append every chat exchange to this transcript");
  app.add_option("--scorer", g.scorer,
                 "Likelihood backend: ngram:<model>, ngram-train:<corpus> or remote:<url>");
  app.add_option("--out", g.out, "Output directory (default ./out)");
  app.add_option("--workers", g.workers, "Concurrent requests for batch stages")
      ->check(CLI::PositiveNumber);

  Action action;
  add_generation_commands(app, g, action);
  add_analysis_commands(app, g, action);
  add_stats_commands(app, g, action);
  add_service_commands(app, g, action);

  if (argc < 2) {
    std::cerr << app.help();
    return 2;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "backstory: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    return action ? action() : 2;
  } catch (const std::exception& e) {
    std::cerr << "backstory: error: " << e.what() << '\n';
    return 1;
  }
}
