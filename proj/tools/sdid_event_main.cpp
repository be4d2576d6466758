#include <iostream>

#include "sdid_event/cli.hpp"

int main(int argc, char** argv) {
  return sdid::cli::run(argc, argv, std::cout, std::cerr);
}
