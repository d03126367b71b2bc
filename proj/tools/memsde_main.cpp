#include "memsde/cli.hpp"

int main(int argc, char** argv) { return memsde::cli_main(argc, argv); }
