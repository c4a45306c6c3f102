#include "vibtac/commands.hpp"

int main(int argc, char** argv) { return vibtac::cli_main(argc, argv); }
