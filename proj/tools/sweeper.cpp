#include "sweeper/cli.hpp"

int main(int argc, char** argv) { return sweeper::run_cli(argc, argv); }
