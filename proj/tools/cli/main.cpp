#include "cli.hpp"

int main(int argc, char** argv) { return orbit::cli::run_cli({argv + 1, argv + argc}); }
