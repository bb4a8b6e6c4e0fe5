#include <iostream>
#include <string>
#include <vector>

#include "exo/cli.hpp"

int main(int argc, char **argv) {
  const std::vector<std::string> args(argv, argv + argc);
  return exo::cli::run(args, std::cout, std::cerr);
}
