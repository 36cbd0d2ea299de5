#pragma once

#include <functional>

#include <CLI11.hpp>

#include "context.hpp"

namespace backstory::cli {

// The selected subcommand's body; runs after parsing succeeds.
using Action = std::function<int()>;

void add_generation_commands(CLI::App& app, GlobalOptions& g, Action& action);
void add_analysis_commands(CLI::App& app, GlobalOptions& g, Action& action);
void add_stats_commands(CLI::App& app, GlobalOptions& g, Action& action);
void add_service_commands(CLI::App& app, GlobalOptions& g, Action& action);

}  // namespace backstory::cli
