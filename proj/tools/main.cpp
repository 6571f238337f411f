#include "commands.hpp"

int main(int argc, char** argv) { return ctxscale::cli::run(argc, argv); }
