#include <iostream>

#include "vemspectra/cli.hpp"

int main(int argc, char** argv) {
  return vemspectra::parse_and_dispatch(argc, argv, std::cout, std::cerr);
}
