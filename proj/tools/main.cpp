#include "cli.hpp"

int main(int argc, char** argv) { return confattr::cli::run(argc, argv); }
