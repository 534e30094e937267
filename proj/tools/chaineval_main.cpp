#include "chaineval/cli.hpp"

int main(int argc, char** argv) { return chaineval::run_command(argc, argv); }
