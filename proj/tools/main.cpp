#include "narrative_audit/cli.hpp"

int main(int argc, char** argv) { return naudit::dispatch(argc, argv); }
