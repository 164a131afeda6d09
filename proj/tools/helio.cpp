#include <iostream>
#include <string>
#include <vector>

#include "helio/cli.hpp"

int main(int argc, char** argv) {
  return helio::cli::run(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
