#include <iostream>

#include "qdy/cli.hpp"

int main(int argc, char** argv) { return qdy::cli::run(argc, argv, std::cout, std::cerr); }
