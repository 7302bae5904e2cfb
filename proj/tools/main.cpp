#include <iostream>
#include <string>
#include <vector>

#include "rankx/cli.hpp"

int main(int argc, char** argv) {
  return rankx::cli::dispatch(std::vector<std::string>(argv + 1, argv + argc), std::cout,
                              std::cerr);
}
