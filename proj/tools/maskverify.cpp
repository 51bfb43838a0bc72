#include "maskverify/cli.hpp"

int main(int argc, char ** argv) { return maskverify::cli::run_command(argc, argv); }
