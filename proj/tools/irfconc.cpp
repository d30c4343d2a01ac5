#include "irf/cli.hpp"

int main(int argc, char** argv) { return irf::cli::run(argc, argv); }
