#include "khessian/cli.hpp"

int main(int argc, char** argv) { return khess::cli::run(argc, argv); }
