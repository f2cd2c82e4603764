#include <iostream>
#include <string>
#include <vector>

#include "cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return teesplit::cli::cli_main(std::move(args), std::cout, std::cerr);
}
