#include "admix/cli.hpp"

int main(int argc, char** argv) { return admix::run_cli(argc, argv); }
