#include <iostream>

#include "sif/cli.hpp"

int main(int argc, char** argv) { return sif::run_cli(argc, argv, std::cout, std::cerr); }
