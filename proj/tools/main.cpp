#include "mvproto/cli.hpp"

int main(int argc, char** argv) { return mvproto::run_cli(argc, argv); }
