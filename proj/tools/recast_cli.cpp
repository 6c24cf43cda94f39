#include <string>
#include <vector>

#include "recast/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return recast::cli::run(args);
}
