#include "asc/cli.hpp"

int main(int argc, char** argv) { return asc::cli::run_command(argc, argv); }
