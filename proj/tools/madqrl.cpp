#include <iostream>

#include "madqrl/cli.hpp"

int main(int argc, char** argv) { return madqrl::cli::run(argc, argv, std::cout, std::cerr); }
