#include <iostream>

#include "amff/cli.hpp"

int main(int argc, char** argv) { return amff::cli::run(argc, argv, std::cout, std::cerr); }
