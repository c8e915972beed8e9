#include <iostream>

#include "sheetwarp/cli.hpp"

int main(int argc, char** argv) { return sheetwarp::run_cli(argc, argv, std::cout, std::cerr); }
