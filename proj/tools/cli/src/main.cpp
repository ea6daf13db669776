#include "papnf/cli/commands.hpp"

int main(int argc, char** argv) { return papnf::cli::run(argc, argv); }
