#include "simbeam/harness.hpp"

int main(int argc, char** argv) { return simbeam::cli_main(argc, argv); }
