#include "mfl/cli.hpp"

int main(int argc, char** argv) { return mfl::run_cli(argc, argv); }
