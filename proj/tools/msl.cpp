#include "msl/cli.hpp"

int main(int argc, char** argv) { return msl::cli_main(argc, argv); }
