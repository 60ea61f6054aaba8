#include "cli.hpp"

int main(int argc, char** argv) { return umlr::cli::main_entry(argc, argv); }
