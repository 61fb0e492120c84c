#include <iostream>

#include "softctl/cli/cli.hpp"

int main(int argc, char** argv) { return softctl::cli::main(argc, argv, std::cout, std::cerr); }
