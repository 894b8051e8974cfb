#include <vector>

#include "dsync/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return dsync::run_cli(args);
}
