#include "shapca/commands.hpp"

int main(int argc, char** argv) { return shapca::cli::run(argc, argv); }
