#include "levyid/cli.hpp"

int main(int argc, char** argv) { return levyid::cli::run(argc, argv); }
