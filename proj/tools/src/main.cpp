#include <cstdlib>
#include <iostream>

#include "veml_cli/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::optional<std::string> env;
  if (const char* s = std::getenv("VEML_STORE"); s && *s) env = s;
  return veml::cli::run(args, std::cout, std::cerr, env);
}
