#include "rt/cli.hpp"

int main(int argc, char** argv) { return rt::run_cli(argc, argv); }
