#include <iostream>
#include <string>
#include <vector>

#include "lutdla/cli/cli.hpp"

int main(int argc, char** argv) {
  return lutdla::cli::run(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
