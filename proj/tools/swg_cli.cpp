#include "swg/cli.hpp"

int main(int argc, char ** argv) {
    return swg::cli::main(argc, argv);
}
