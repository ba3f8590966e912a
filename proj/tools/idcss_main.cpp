#include <iostream>

#include "idcss/cli.hpp"

int main(int argc, char** argv) { return idcss::cli::run(argc, argv, std::cout, std::cerr); }
