#include <iostream>

#include "srnreg/cli.hpp"

int main(int argc, char** argv) { return srnreg::cli::run(argc, argv, std::cout, std::cerr); }
