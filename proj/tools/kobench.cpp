#include "kaczmarz/cli.hpp"

int main(int argc, char** argv) { return kaczmarz::cli::run(argc, argv); }
