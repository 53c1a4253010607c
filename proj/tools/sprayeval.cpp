#include <iostream>

#include "sprayeval/report/cli.hpp"

int main(int argc, char** argv) { return sprayeval::cli_main(argc, argv, std::cout, std::cerr); }
