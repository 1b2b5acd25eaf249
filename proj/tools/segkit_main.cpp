#include "segkit/cli.hpp"

int main(int argc, char** argv) { return segkit::cli::run_cli(argc, argv); }
