#include "cli.hpp"

int main(int argc, char** argv) { return asdkit::cli::run(argc, argv); }
