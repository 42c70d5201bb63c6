#include "moldsynth/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
  moldsynth::cli::install_signal_handlers();
  return moldsynth::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
