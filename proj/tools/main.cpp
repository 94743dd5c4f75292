#include <iostream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "covevo/runtime.hpp"

int main(int argc, char** argv) {
  covevo::configure_allocator();
  std::vector<std::string> args(argv + 1, argv + argc);
  return covevo::cli::run_cli(args, std::cout, std::cerr);
}
