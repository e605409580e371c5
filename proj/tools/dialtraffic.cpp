#include "dialtraffic/cli/cli.hpp"

int main(int argc, char** argv) { return dialtraffic::cli::run_cli(argc, argv); }
