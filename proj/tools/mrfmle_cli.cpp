#include "mrfmle/cli.hpp"

int main(int argc, char** argv) { return mrfmle::cli_main(argc, argv); }
