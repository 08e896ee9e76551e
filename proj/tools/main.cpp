#include <cstdio>
#include <exception>

#include <CLI11.hpp>

#include "commands.hpp"
#include "train_flags.hpp"

int main(int argc, char** argv) {
  CLI::App app{"cludi: clustering via self-supervised diffusion"};
  app.require_subcommand(1);
  cludi::cli::register_generate(app);
  cludi::cli::register_train(app);
  cludi::cli::register_eval(app);
  cludi::cli::register_infer(app);
  cludi::cli::register_export_embeddings(app);
  cludi::cli::register_ablate(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const cludi::cli::UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
