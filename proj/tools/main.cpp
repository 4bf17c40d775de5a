#include "pillarcast/cli.hpp"

int main(int argc, char** argv) { return pillarcast::cli::run(argc, argv); }
