#include "wda/cli.hpp"

int main(int argc, char** argv) { return wda::run_cli(argc, argv); }
