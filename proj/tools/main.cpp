#include "recauction/cli.hpp"

int main(int argc, char **argv) { return recauction::cli::run(argc, argv); }
