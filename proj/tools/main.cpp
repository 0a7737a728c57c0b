#include "duetsep/cli.hpp"

int main(int argc, char** argv) { return duetsep::cli::dispatch(argc, argv); }
