#include "seqlearn/cli.hpp"

int main(int argc, char** argv) { return seqlearn::dispatch(argc, argv); }
