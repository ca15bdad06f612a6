#include "phantom/cli.hpp"

int main(int argc, char** argv) { return phantom::cli(argc, argv); }
