#include "ctmed/cli.hpp"

int main(int argc, char** argv) { return ctmed::cli::run(argc, argv); }
