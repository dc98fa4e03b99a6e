#include <iostream>

#include "wismc/cli.hpp"

int main(int argc, char** argv) { return wismc::dispatch(argc, argv, std::cout, std::cerr); }
