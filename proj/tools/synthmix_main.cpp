#include "synthmix/cli.hpp"

int main(int argc, char** argv) { return synthmix::cli_main(argc, argv); }
