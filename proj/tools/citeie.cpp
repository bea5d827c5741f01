#include "commands.hpp"

int main(int argc, char** argv) { return citeie::cli::run(argc, argv); }
