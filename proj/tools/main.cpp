#include <iostream>
#include <string>
#include <vector>

#include "mmfuse/cli/commands.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return mmfuse::cli::run(args, std::cout, std::cerr);
}
