#include "psim/cli.hpp"

int main(int argc, char** argv) { return psim::cli_main(argc, argv); }
