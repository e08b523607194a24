#include <iostream>
#include <string>
#include <vector>

#include "bethe/cli/app.hpp"

int main(int argc, char** argv) {
  return bethe::cli::main_entry(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
