#include "hmm/cli.hpp"

int main(int argc, char** argv) { return hmm::cli::run(argc, argv); }
