#include "sialign/cli.hpp"

int main(int argc, char** argv) { return sialign::run_cli(argc, argv); }
