#include "fqb/cli.hpp"

int main(int argc, char** argv) { return fqb::cli::run(argc, argv); }
