#include "tpca/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return tpca::run_cli(argc, argv, std::cin, std::cout, std::cerr); }
