#include "provdb/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return provdb::run_cli(argc, argv, std::cout, std::cerr); }
