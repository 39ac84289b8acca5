#include <iostream>

#include "petal_cli.hpp"

int main(int argc, char** argv) { return petal::cli::run(argc, argv, std::cout, std::cerr); }
