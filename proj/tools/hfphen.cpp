#include "hfphen/cli.hpp"

int main(int argc, char** argv) { return hfphen::dispatch(argc, argv); }
