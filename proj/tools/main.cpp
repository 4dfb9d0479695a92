#include "cli.hpp"

int main(int argc, char** argv) { return vgmix::cli::run(argc, argv); }
