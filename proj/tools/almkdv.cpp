#include "almkdv/cli.hpp"

int main(int argc, char** argv) { return almkdv::cli::run(argc, argv); }
