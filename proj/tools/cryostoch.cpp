#include "cryostoch/run.hpp"

int main(int argc, char** argv) { return cryostoch::cli_main(argc, argv); }
