#include "cli.hpp"

int main(int argc, char** argv) { return splatba::cli::run(argc, argv); }
