#include "partprobe/cli.hpp"

int main(int argc, char** argv) { return partprobe::cli::run_main(argc, argv); }
