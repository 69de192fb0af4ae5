#include <iostream>

#include "ampere/cli/cli.hpp"

int main(int argc, char** argv) {
  return ampere::cli::run({argv + 1, argv + argc}, std::cout, std::cerr);
}
