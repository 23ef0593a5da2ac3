#include "jobmatch/cli.hpp"

int main(int argc, char** argv) { return jobmatch::run_cli(argc, argv); }
