#include "tgf/cli.hpp"

int main(int argc, char** argv) { return tgf::run_cli(argc, argv); }
