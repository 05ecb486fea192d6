#include <iostream>

#include "qreset/cli.hpp"

int main(int argc, char** argv) { return qreset::cli::run(argc, argv, std::cout, std::cerr); }
