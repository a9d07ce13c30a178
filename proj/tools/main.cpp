#include <string>
#include <vector>

#include "sgltn/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return sgltn::cli::dispatch(args);
}
