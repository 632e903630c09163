#include "commands.hpp"

int main(int argc, char** argv) { return bassmt::cli::run(argc, argv); }
