#include "ringfree/cli.hpp"

int main(int argc, char** argv) { return ringfree::cli::run(argc, argv); }
