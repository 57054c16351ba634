#include <iostream>

#include "mtdc/cli.hpp"

int main(int argc, char** argv) { return mtdc::cli_main(argc, argv, std::cout, std::cerr); }
