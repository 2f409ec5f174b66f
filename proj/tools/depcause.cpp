#include "depcause/cli.hpp"

int main(int argc, char** argv) { return depcause::cli::run(argc, argv); }
