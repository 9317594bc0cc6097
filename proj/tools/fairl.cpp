#include "fairl/cli.hpp"

int main(int argc, char** argv) { return fairl::run_cli(argc, argv); }
