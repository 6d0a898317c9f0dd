#include "vecforge/cli.hpp"

int main(int argc, char** argv) { return vecforge::cli::run(argc, argv); }
