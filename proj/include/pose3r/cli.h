#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace pose3r {

// Runs the pose3r command line; args excludes the program name. Returns the exit status.
int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);
int run_cli(int argc, char **argv);

} // namespace pose3r
