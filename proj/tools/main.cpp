#include <iostream>

#include "patience/cli.hpp"

int main(int argc, char** argv) {
  return patience::cli::run_cli(argc, argv, std::cout, std::cerr);
}
