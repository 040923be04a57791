#include <iostream>
#include <string>
#include <vector>

#include "dynonet/commands.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return dynonet::cli::run(args, std::cout, std::cerr);
}
