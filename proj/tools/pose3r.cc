#include "pose3r/cli.h"

int main(int argc, char **argv) { return pose3r::run_cli(argc, argv); }
