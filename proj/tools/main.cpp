#include "c19vi/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
    return c19vi::cli::dispatch(argc, argv, std::cout, std::cerr);
}
