#include "nonholo/cli.hpp"

int main(int argc, char** argv) { return nonholo::cli_main(argc, argv); }
