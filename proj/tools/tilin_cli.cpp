#include <iostream>

#include "tilin/cli.hpp"

int main(int argc, char** argv) { return tilin::run_cli(argc, argv, std::cout, std::cerr); }
