#include "pointcache/cli.hpp"

int main(int argc, char** argv) { return pointcache::cli::run(argc, argv); }
