#include "uamil/cli.hpp"

int main(int argc, char** argv) { return uamil::run_cli(argc, argv); }
