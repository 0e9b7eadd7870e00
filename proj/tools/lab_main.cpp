#include <string>
#include <vector>

#include "uaplab/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return uaplab::cli::run_cli(args);
}
