#pragma once

// Command-line front end. `run` parses arguments, dispatches a subcommand
// and returns the process exit status (0 ok, 1 usage, 2 data, 3 numerical).

#include <string>
#include <vector>

namespace citeie::cli {

int run(int argc, char** argv);
int run(const std::vector<std::string>& args);  // args[0] is the program name

}  // namespace citeie::cli
