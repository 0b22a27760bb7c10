#include "cognet/cli/cli.hpp"

int main(int argc, char** argv) { return cognet::cli::run_cli(argc, argv); }
