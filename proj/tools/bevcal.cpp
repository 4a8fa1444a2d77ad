#include "bevcal/cli.hpp"

int main(int argc, char** argv) { return bevcal::run_cli(argc, argv); }
