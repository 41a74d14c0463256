#include "onsager/cli.hpp"

int main(int argc, char** argv) { return onsager::cli::run(argc, argv); }
