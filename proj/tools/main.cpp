#include "binbrain/cli.hpp"

int main(int argc, char** argv) { return binbrain::run_cli(argc, argv); }
