#pragma once

#include <CLI11.hpp>

namespace cludi::cli {

// Each register_* adds a subcommand whose callback does the work.
void register_generate(CLI::App& app);
void register_train(CLI::App& app);
void register_eval(CLI::App& app);
void register_infer(CLI::App& app);
void register_export_embeddings(CLI::App& app);
void register_ablate(CLI::App& app);

}  // namespace cludi::cli
