#include <iostream>
#include <string>
#include <vector>

#include "cagen/commands.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return cagen::cli::run(args, std::cout, std::cerr);
}
