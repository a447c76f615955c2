#include "fairhgr/cli/commands.hpp"

int main(int argc, char** argv) { return fairhgr::cli::run(argc, argv); }
