#include "modiff/cli.hpp"

int main(int argc, char** argv) { return modiff::cli::run(argc, argv); }
