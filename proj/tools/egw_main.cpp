#include <iostream>

#include "egw/cli.hpp"

int main(int argc, char** argv) { return egw::cli::run(argc, argv, std::cout, std::cerr); }
