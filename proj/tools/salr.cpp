#include <iostream>
#include <string>
#include <vector>

#include "salr/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return salr::run_cli(args, std::cout, std::cerr);
}
