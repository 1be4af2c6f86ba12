#include <iostream>
#include <string>
#include <vector>

#include "rskelly/cli.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv, argv + argc);
  return rskelly::cli::run(args, std::cout, std::cerr);
}
