#include <string>
#include <vector>

#include "rlqr/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return rlqr::run_cli(args);
}
