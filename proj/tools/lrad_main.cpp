#include "lrad/cli.hpp"

int main(int argc, char** argv) { return lrad::cli::main(argc, argv); }
