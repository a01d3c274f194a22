#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "libopt/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  libopt::cli::Io io{std::cin, std::cout, std::cerr, std::filesystem::current_path(),
                     [](const std::string& name) -> std::optional<std::string> {
                       const char* v = std::getenv(name.c_str());
                       if (!v) return std::nullopt;
                       return std::string(v);
                     }};
  return libopt::cli::dispatch(std::move(args), io);
}
