#include "condstable/harness.hpp"

int main(int argc, char** argv) { return condstable::main_entry(argc, argv); }
