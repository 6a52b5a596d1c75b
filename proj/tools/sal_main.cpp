#include "sal/cli.hpp"

int main(int argc, char** argv) { return sal::dispatch(argc, argv); }
