#include <iostream>

#include "cli_util.hpp"
#include "saelab/error.hpp"

int main(int argc, char** argv) {
  CLI::App app{"saelab: sparse autoencoder training, concept evaluation and neuron explanation"};
  app.require_subcommand(1);
  saelab::cli::register_model(app);
  saelab::cli::register_concepts(app);
  saelab::cli::register_explain(app);
  saelab::cli::register_toy(app);
  saelab::cli::register_db(app);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const saelab::Error& e) {
    std::cerr << "error [" << saelab::error_code_name(e.code()) << "]: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
