// Materializes the synthetic `toys` hierarchy used by the tests and the
// README walkthrough.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "libopt/toys.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Create a Libopt hierarchy holding the toys collection and the fakea/fakeb drivers."};
  std::string root;
  std::uint32_t seed = 1;
  app.add_option("root", root, "directory to create (becomes LIBOPT_DIR)")->required();
  app.add_option("-s,--seed", seed, "seed of the scripted results");
  CLI11_PARSE(app, argc, argv);

  try {
    auto fx = libopt::toys::generate_fixture(root, seed);
    std::cout << "created " << std::filesystem::absolute(fx.root).string() << " (" << fx.problems.size()
              << " problems, solvers fakea fakeb)\n";
  } catch (const std::exception& e) {
    std::cerr << "libopt-toys: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
